"""Perception-action latency model for ground-station inference."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from uavbench.datamodel import InvariantViolation


@dataclass(frozen=True)
class LatencyModel:
    """Delays in seconds between a state snapshot and the resulting command.

    inference is either a fixed value or a (lo, hi) pair sampled uniformly
    per call; uplink and downlink are fixed transport delays.
    """

    inference: float | tuple[float, float] = 0.0
    uplink: float = 0.0
    downlink: float = 0.0

    def __post_init__(self) -> None:
        if isinstance(self.inference, tuple):
            lo, hi = self.inference
            if not (0 <= lo <= hi and math.isfinite(hi)):
                raise InvariantViolation(
                    "inference", f"bad inference range {self.inference!r}"
                )
        elif not (math.isfinite(self.inference) and self.inference >= 0):
            raise InvariantViolation(
                "inference", f"inference must be >= 0: {self.inference!r}"
            )
        for name in ("uplink", "downlink"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise InvariantViolation(name, f"{name} must be >= 0: {v!r}")

    def inference_s(self, rng: random.Random | None = None) -> float:
        if isinstance(self.inference, tuple):
            lo, hi = self.inference
            return (rng or random).uniform(lo, hi)
        return self.inference

    def transport_s(self) -> float:
        return self.uplink + self.downlink

    def worst_case_s(self) -> float:
        inf = self.inference[1] if isinstance(self.inference, tuple) else self.inference
        return inf + self.uplink + self.downlink


# Measured single-inference times of published models on desktop hardware.
LATENCY_PRESETS: dict[str, LatencyModel] = {
    "none": LatencyModel(),
    "seq2seq": LatencyModel(inference=0.057),
    "cma": LatencyModel(inference=0.067),
    "openvla": LatencyModel(inference=0.172),
    "travel": LatencyModel(inference=0.188),
    "pi0": LatencyModel(inference=0.289),
}
