"""Run configuration: defaults, JSON config files, and flag overrides.

One frozen :class:`Config` carries every tunable the command-line tools
share — vehicle limits, control cadence, communication scheme, latency
preset, scoring bandwidth, and seed — and converts itself into the typed
parameter objects the underlying modules expect.
"""

from __future__ import annotations

import json
from collections.abc import Mapping
from dataclasses import dataclass, fields, replace
from pathlib import Path

from uavbench.bridge.latency import LATENCY_PRESETS, LatencyModel
from uavbench.bridge.schemes import SchemeConfig, SchemeKind
from uavbench.datamodel import InvariantViolation
from uavbench.errors import HarnessError
from uavbench.sim import DEFAULT_SIM_PARAMS, SimParams


class ConfigError(HarnessError):
    """A config file could not be read or does not describe a valid run."""


_POSITIVE = (
    "v_max",
    "omega_max",
    "fov_half",
    "view_range",
    "chunk_size",
    "step_dt",
    "chunk_period",
    "d_th",
)


@dataclass(frozen=True)
class Config:
    """Shared knobs for generation, evaluation, and the live bridge."""

    v_max: float = 2.0
    omega_max: float = 1.0
    fov_half: float = 0.7
    view_range: float = 60.0
    chunk_size: int = 10
    step_dt: float = 0.2
    chunk_period: float = 0.4
    d_th: float = 3.0
    latency: str = "none"
    scheme: str = "global"
    seed: int = 0

    def __post_init__(self) -> None:
        for name in _POSITIVE:
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise InvariantViolation(name, f"{name} must be a number")
            if not value > 0:
                raise InvariantViolation(name, f"{name} must be positive")
        if not isinstance(self.chunk_size, int):
            raise InvariantViolation("chunk_size", "chunk_size must be an integer")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise InvariantViolation("seed", "seed must be an integer")
        if self.latency not in LATENCY_PRESETS:
            raise InvariantViolation(
                "latency",
                f"unknown latency preset {self.latency!r}; "
                f"choose from {sorted(LATENCY_PRESETS)}",
            )
        kinds = [k.value for k in SchemeKind]
        if self.scheme not in kinds:
            raise InvariantViolation(
                "scheme", f"unknown scheme {self.scheme!r}; choose from {kinds}"
            )
        # SchemeConfig enforces chunk_period >= step_dt; surface that early.
        self.scheme_config()

    def sim_params(self) -> SimParams:
        return replace(
            DEFAULT_SIM_PARAMS,
            v_max=self.v_max,
            omega_max=self.omega_max,
            step_dt=self.step_dt,
            fov_half=self.fov_half,
            view_range=self.view_range,
            chunk_size=self.chunk_size,
        )

    def scheme_config(self) -> SchemeConfig:
        return SchemeConfig(
            scheme=SchemeKind(self.scheme),
            chunk_period=self.chunk_period,
            step_dt=self.step_dt,
        )

    def latency_model(self) -> LatencyModel:
        return LATENCY_PRESETS[self.latency]


_FIELDS = {f.name for f in fields(Config)}


def load_config(
    path: str | Path | None = None,
    overrides: Mapping[str, object] | None = None,
) -> Config:
    """Build a Config from defaults, an optional JSON file, then overrides.

    The file must be a JSON object whose keys are all Config field names;
    unknown keys are rejected rather than ignored so typos fail loudly.
    Override entries with value ``None`` are skipped, which lets callers pass
    optional command-line flags straight through.
    """
    data: dict[str, object] = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}")
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        unknown = sorted(set(raw) - _FIELDS)
        if unknown:
            raise ConfigError(f"config {path} has unknown keys: {', '.join(unknown)}")
        data.update(raw)
    if overrides:
        for key, value in overrides.items():
            if key not in _FIELDS:
                raise ConfigError(f"unknown config override {key!r}")
            if value is not None:
                data[key] = value
    try:
        return Config(**data)
    except TypeError as e:
        raise ConfigError(str(e))
