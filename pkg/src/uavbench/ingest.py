"""Flight-log ingestion, command-set handling, and dataset statistics.

Raw inputs are a CSV flight log (`t_wall,lat,lon,alt,roll_deg,pitch_deg,
yaw_deg`) and a frame index (`t_wall,obs_ref`).  Ingestion aligns the two on
a shared 5 Hz grid anchored at the first common timestamp, converts poses to
the flight-local frame, and picks the nearest camera frame for each tick,
breaking ties toward the earlier frame.
"""

from __future__ import annotations

import bisect
import json
import math
import urllib.request
from dataclasses import dataclass, field
from typing import Callable, Sequence

from uavbench import datamodel as dm
from uavbench import geo
from uavbench.datamodel import (
    Episode,
    EpisodeSource,
    Frame,
    Instruction,
    InstructionForm,
    ParseError,
    TaskType,
)
from uavbench.errors import HarnessError
from uavbench.geo import GeoPose, OutOfRange

MIN_OVERLAP_S = 0.4

# Distance histogram: 1 m buckets over [0, 50) plus one overflow bucket.
HISTOGRAM_BUCKETS = 50


class NonMonotoneTimestamp(HarnessError):
    pass


class NoOverlap(HarnessError):
    pass


class GeneratorUnavailable(HarnessError):
    pass


class ValidationFailed(HarnessError):
    def __init__(self, variant: str, reason: str):
        self.variant = variant
        super().__init__(f"{reason}: {variant!r}")


@dataclass(frozen=True)
class StateLog:
    """Time-stamped global poses, strictly increasing in wall time."""

    times: tuple[float, ...]
    poses: tuple[GeoPose, ...]

    def __post_init__(self) -> None:
        if len(self.times) < 2:
            raise ParseError(0, "flight log needs at least 2 samples")
        for i in range(1, len(self.times)):
            if not self.times[i] > self.times[i - 1]:
                raise NonMonotoneTimestamp(
                    f"sample {i}: t_wall {self.times[i]!r} not increasing"
                )

    @property
    def t_start(self) -> float:
        return self.times[0]

    @property
    def t_end(self) -> float:
        return self.times[-1]


@dataclass(frozen=True)
class FrameIndex:
    """Camera frame references by wall time, strictly increasing."""

    times: tuple[float, ...]
    refs: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.times:
            raise ParseError(0, "frame index is empty")
        for i in range(1, len(self.times)):
            if not self.times[i] > self.times[i - 1]:
                raise NonMonotoneTimestamp(
                    f"frame {i}: t_wall {self.times[i]!r} not increasing"
                )

    @property
    def t_start(self) -> float:
        return self.times[0]

    @property
    def t_end(self) -> float:
        return self.times[-1]


_LOG_HEADER = ("t_wall", "lat", "lon", "alt", "roll_deg", "pitch_deg", "yaw_deg")


def parse_flight_log(data: bytes) -> StateLog:
    """Parse the CSV flight log schema; angles arrive in degrees."""
    times: list[float] = []
    poses: list[GeoPose] = []
    lines = data.decode("utf-8").splitlines()
    for i, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if i == 1 and line.replace(" ", "") == ",".join(_LOG_HEADER):
            continue
        parts = line.split(",")
        if len(parts) != 7:
            raise ParseError(i, f"need 7 fields, got {len(parts)}")
        try:
            t, lat, lon, alt, roll, pitch, yaw = (float(p) for p in parts)
        except ValueError:
            raise ParseError(i, f"bad value in {line!r}")
        if not -90.0 <= lat <= 90.0:
            raise ParseError(i, f"latitude out of range: {lat!r}")
        if not -180.0 < lon <= 180.0:
            raise ParseError(i, f"longitude out of range: {lon!r}")
        times.append(t)
        poses.append(
            GeoPose(
                lat=lat,
                lon=lon,
                alt=alt,
                roll=math.radians(roll),
                pitch=math.radians(pitch),
                yaw=math.radians(yaw),
            )
        )
    return StateLog(times=tuple(times), poses=tuple(poses))


def parse_frame_index(data: bytes) -> FrameIndex:
    times: list[float] = []
    refs: list[str] = []
    for i, raw in enumerate(data.decode("utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if i == 1 and line.replace(" ", "") == "t_wall,obs_ref":
            continue
        parts = line.split(",", 1)
        if len(parts) != 2 or not parts[1]:
            raise ParseError(i, f"need t_wall,obs_ref, got {line!r}")
        try:
            times.append(float(parts[0]))
        except ValueError:
            raise ParseError(i, f"bad timestamp in {line!r}")
        refs.append(parts[1])
    return FrameIndex(times=tuple(times), refs=tuple(refs))


def interpolate_state(log: StateLog, t: float) -> GeoPose:
    """Linear pose interpolation at wall time t; exact at sample times.

    Positions interpolate componentwise; attitude uses shortest-arc blending.
    """
    if t < log.t_start or t > log.t_end:
        raise OutOfRange(f"t {t!r} outside log range [{log.t_start}, {log.t_end}]")
    i = bisect.bisect_right(log.times, t)
    if i == len(log.times):
        return log.poses[-1]
    if t == log.times[i - 1]:
        return log.poses[i - 1]
    a, b = log.poses[i - 1], log.poses[i]
    u = (t - log.times[i - 1]) / (log.times[i] - log.times[i - 1])
    return GeoPose(
        lat=a.lat + u * (b.lat - a.lat),
        lon=a.lon + u * (b.lon - a.lon),
        alt=a.alt + u * (b.alt - a.alt),
        roll=geo.interp_angle(a.roll, b.roll, u),
        pitch=geo.interp_angle(a.pitch, b.pitch, u),
        yaw=geo.interp_angle(a.yaw, b.yaw, u),
    )


def _nearest_ref(frames: FrameIndex, t: float) -> str:
    i = bisect.bisect_left(frames.times, t)
    if i == 0:
        return frames.refs[0]
    if i == len(frames.times):
        return frames.refs[-1]
    before = t - frames.times[i - 1]
    after = frames.times[i] - t
    # Ties break toward the earlier frame.
    return frames.refs[i - 1] if before <= after else frames.refs[i]


def _default_instruction(frames: Sequence[Frame]) -> Instruction:
    """Placeholder annotation for unlabeled ingests: net displacement as a
    free-form translate command."""
    last = frames[-1].pose
    distance = round(math.hypot(last.x, last.y, last.z), 6)
    heading = round(math.atan2(last.y, last.x), 6) if distance > 1e-9 else 0.0
    return Instruction(
        text="unlabeled flight segment",
        task_type=TaskType.TRANSLATE,
        form=InstructionForm.OPEN_VOCAB,
        params={"distance": distance, "angle": heading},
    )


def align_and_resample(
    log: StateLog,
    frames: FrameIndex,
    rate: float = dm.CONTROL_RATE_HZ,
    *,
    episode_id: str | None = None,
    instruction: Instruction | None = None,
    source: EpisodeSource = EpisodeSource.REAL_LOG,
) -> Episode:
    """Fuse a flight log and frame index into one episode on the control grid.

    The grid starts at the first timestamp both inputs cover and steps at
    1/rate, keeping every tick both inputs can serve.  Requires at least
    0.4 s of overlap.
    """
    if rate <= 0:
        raise OutOfRange(f"rate must be positive: {rate!r}")
    step = 1.0 / rate
    start = max(log.t_start, frames.t_start)
    end = min(log.t_end, frames.t_end)
    if end - start < MIN_OVERLAP_S:
        raise NoOverlap(
            f"overlap {end - start:.3f} s below minimum {MIN_OVERLAP_S} s"
        )
    origin = interpolate_state(log, start)
    out: list[Frame] = []
    k = 0
    while True:
        t_rel = k * step
        t_abs = start + t_rel
        if t_abs > end + 1e-9:
            break
        pose = interpolate_state(log, min(t_abs, log.t_end))
        out.append(
            Frame(
                t=t_rel,
                pose=geo.gps_to_local(origin, pose),
                obs_ref=_nearest_ref(frames, t_abs),
            )
        )
        k += 1
    if instruction is None:
        instruction = _default_instruction(out)
    if episode_id is None:
        episode_id = f"log-{start:.3f}".replace(".", "_")
    return Episode(
        id=episode_id,
        instruction=instruction,
        origin=origin,
        frames=tuple(out),
        source=source,
    )


# --- command set -----------------------------------------------------------

# Paraphrase pool per task.  Every template repeats the side and distance
# placeholders of its task so rendered variants always pass validation.
VARIANT_TEMPLATES: dict[TaskType, tuple[str, ...]] = {
    TaskType.TAKEOFF: (
        "climb to {distance} meters",
        "lift off and rise to {distance} meters",
        "ascend until you are {distance} meters up",
    ),
    TaskType.TRANSLATE: (
        "fly {distance} meters {direction}",
        "travel {distance} meters {direction}",
        "shift {distance} meters {direction}",
    ),
    TaskType.ROTATE: (
        "turn {degrees} degrees to the {turn}",
        "yaw {degrees} degrees {turn}",
        "spin {degrees} degrees to the {turn}",
    ),
    TaskType.DIVE: (
        "descend {distance} meters in a forward dive",
        "drop {distance} meters while moving ahead",
        "nose down and lose {distance} meters",
    ),
    TaskType.APPROACH: (
        "move in close to the object",
        "fly up to the object and stop short",
        "close the distance to the object",
    ),
    TaskType.ORBIT: (
        "circle the object once",
        "fly a full loop around the object",
        "make one pass all the way around the object",
    ),
    TaskType.PASS_SIDE: (
        "pass the object on its {side} side",
        "go by the {side} side of the object",
        "overtake the object along its {side} side",
    ),
    TaskType.FLY_BETWEEN: (
        "fly through the gap between the two objects",
        "thread between the two objects",
        "pass through the middle of the two objects",
    ),
    TaskType.HOVER_BESIDE: (
        "hold position just to the {side} of the object",
        "park in the air on the {side} side of the object",
        "stay hovering off the object's {side} side",
    ),
    TaskType.FACE_TARGET: (
        "rotate until you are facing the object",
        "point the nose at the object",
        "turn toward the object and hold",
    ),
}


@dataclass(frozen=True)
class CommandSet:
    """Canonical fixed templates plus paraphrase variants per task."""

    templates: dict[TaskType, str] = field(
        default_factory=lambda: dict(dm.COMMAND_TEMPLATES)
    )
    variants: dict[TaskType, tuple[str, ...]] = field(
        default_factory=lambda: dict(VARIANT_TEMPLATES)
    )

    def __post_init__(self) -> None:
        for task_type in TaskType:
            if task_type not in self.templates:
                raise ParseError(0, f"command set missing template: {task_type.value}")


DEFAULT_COMMAND_SET = CommandSet()


def render_command_set(cs: CommandSet) -> str:
    lines = []
    for task_type in TaskType:
        lines.append(f"template\t{task_type.value}\t{cs.templates[task_type]}")
        for v in cs.variants.get(task_type, ()):
            lines.append(f"variant\t{task_type.value}\t{v}")
    return "\n".join(lines) + "\n"


def parse_command_set(text: str) -> CommandSet:
    templates: dict[TaskType, str] = {}
    variants: dict[TaskType, list[str]] = {}
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(i, f"need kind\\ttask\\ttext, got {line!r}")
        kind, task_s, body = parts
        try:
            task_type = TaskType(task_s)
        except ValueError:
            raise ParseError(i, f"unknown task type {task_s!r}")
        if kind == "template":
            templates[task_type] = body
        elif kind == "variant":
            variants.setdefault(task_type, []).append(body)
        else:
            raise ParseError(i, f"unknown row kind {kind!r}")
    return CommandSet(
        templates=templates,
        variants={k: tuple(v) for k, v in variants.items()},
    )


def validate_variant(text: str, params: dict) -> list[str]:
    """Check a paraphrase mentions the structured params verbatim."""
    problems = []
    if not text or any(ch in text for ch in "\t\n"):
        problems.append("empty or has reserved characters")
    if "side" in params and str(params["side"]) not in text:
        problems.append(f"missing side word {params['side']!r}")
    if "distance" in params:
        rendered = dm.format_quantity(params["distance"])
        if rendered not in text:
            problems.append(f"missing distance {rendered!r}")
    return problems


TextGenerator = Callable[[str], str]


class HttpTextGenerator:
    """Minimal JSON-over-HTTP paraphrase client: one retry, then fail."""

    def __init__(self, url: str, timeout: float = 10.0):
        self.url = url
        self.timeout = timeout

    def __call__(self, prompt: str) -> str:
        payload = json.dumps({"prompt": prompt}).encode("utf-8")
        last_error: Exception | None = None
        for _ in range(2):
            try:
                req = urllib.request.Request(
                    self.url, data=payload, headers={"Content-Type": "application/json"}
                )
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    body = json.loads(resp.read().decode("utf-8"))
                return str(body["text"])
            except Exception as e:  # noqa: BLE001 - any transport failure retries once
                last_error = e
        raise GeneratorUnavailable(f"paraphrase service failed: {last_error}")


def diversify_instruction(
    fixed: Instruction,
    generator: TextGenerator | None,
    n: int,
    *,
    command_set: CommandSet = DEFAULT_COMMAND_SET,
    fallback_on_error: bool = False,
) -> list[Instruction]:
    """Produce n open-vocabulary variants of a fixed command.

    With no generator the deterministic built-in paraphrase table is used.
    Generated texts must mention the task's side and distance params
    verbatim; anything else raises ValidationFailed.
    """
    if n < 0:
        raise OutOfRange(f"variant count must be non-negative: {n}")
    task_type, params = fixed.task_type, fixed.params

    def from_table() -> list[str]:
        pool = command_set.variants.get(task_type) or (
            command_set.templates[task_type],
        )
        return [
            dm.render_command(pool[i % len(pool)], task_type, params)
            for i in range(n)
        ]

    if generator is None:
        texts = from_table()
    else:
        texts = []
        try:
            for i in range(n):
                prompt = (
                    "Rewrite this drone command, keeping every number and "
                    f"side word exactly as written (variant {i + 1}): {fixed.text}"
                )
                texts.append(generator(prompt).strip())
        except HarnessError:
            raise
        except Exception as e:  # noqa: BLE001 - client failures degrade or surface
            if fallback_on_error:
                texts = from_table()
            else:
                raise GeneratorUnavailable(f"paraphrase generator failed: {e}")
    out = []
    for text in texts:
        problems = validate_variant(text, params)
        if problems:
            raise ValidationFailed(text, "; ".join(problems))
        out.append(
            Instruction(
                text=text,
                task_type=task_type,
                form=InstructionForm.OPEN_VOCAB,
                params=params,
            )
        )
    return out


# --- command text parsing ---------------------------------------------------

_PLACEHOLDER_PATTERNS = {
    "{distance}": r"(?P<distance>-?\d+(?:\.\d+)?)",
    "{degrees}": r"(?P<degrees>-?\d+(?:\.\d+)?)",
    "{turn}": r"(?P<turn>left|right)",
    "{side}": r"(?P<side>left|right)",
    "{direction}": (
        r"(?P<direction>forward|backward|to the left|to the right"
        r"|at (?P<heading_deg>-?\d+(?:\.\d+)?) degrees)"
    ),
}


def _template_regex(template: str):
    import re

    pattern = re.escape(template)
    for placeholder, sub in _PLACEHOLDER_PATTERNS.items():
        pattern = pattern.replace(re.escape(placeholder), sub)
    return re.compile(f"^{pattern}$")


def parse_command(
    text: str, command_set: CommandSet = DEFAULT_COMMAND_SET
) -> tuple[TaskType, dict] | None:
    """Recover the task type and motion params from command text.

    Matches canonical templates first, then the variant pool.  Object
    bindings are not in the text, so target params stay unset.  Returns
    None when nothing matches.
    """
    candidates: list[tuple[TaskType, str]] = []
    for task_type in TaskType:
        candidates.append((task_type, command_set.templates[task_type]))
    for task_type in TaskType:
        for v in command_set.variants.get(task_type, ()):
            candidates.append((task_type, v))
    for task_type, template in candidates:
        m = _template_regex(template).match(text)
        if not m:
            continue
        got = m.groupdict()
        params: dict = {}
        if got.get("distance") is not None:
            params["distance"] = float(got["distance"])
        if got.get("degrees") is not None:
            sign = 1.0 if got.get("turn") == "left" else -1.0
            params["angle"] = sign * math.radians(float(got["degrees"]))
        if got.get("direction") is not None:
            word = got["direction"]
            if word == "forward":
                params["angle"] = 0.0
            elif word == "backward":
                params["angle"] = math.pi
            elif word == "to the left":
                params["angle"] = math.pi / 2
            elif word == "to the right":
                params["angle"] = -math.pi / 2
            else:
                params["angle"] = math.radians(float(got["heading_deg"]))
        if got.get("side") is not None:
            params["side"] = got["side"]
        return task_type, params
    return None


# --- dataset statistics -----------------------------------------------------


@dataclass(frozen=True)
class DatasetStats:
    count: int
    type_counts: dict[TaskType, int]
    type_distribution: dict[TaskType, float]
    distance_histogram: tuple[int, ...]  # 50 one-meter buckets + overflow


def dataset_stats(episodes: Sequence[Episode]) -> DatasetStats:
    """Composition summary: counts, task-type fractions, path-length buckets."""
    counts: dict[TaskType, int] = {}
    hist = [0] * (HISTOGRAM_BUCKETS + 1)
    for e in episodes:
        counts[e.instruction.task_type] = counts.get(e.instruction.task_type, 0) + 1
        length = dm.path_length(e)
        bucket = min(int(length), HISTOGRAM_BUCKETS)
        hist[bucket] += 1
    total = len(episodes)
    distribution = {
        t: counts[t] / total for t in sorted(counts, key=lambda t: t.value)
    }
    return DatasetStats(
        count=total,
        type_counts=dict(sorted(counts.items(), key=lambda kv: kv[0].value)),
        type_distribution=distribution,
        distance_histogram=tuple(hist),
    )


def stats_table(stats: DatasetStats) -> str:
    """Tab-separated composition table."""
    lines = ["task_type\tepisodes\tfraction"]
    for task_type, n in stats.type_counts.items():
        lines.append(
            f"{task_type.value}\t{n}\t{stats.type_distribution[task_type]:.6f}"
        )
    lines.append(f"total\t{stats.count}\t1.000000" if stats.count else "total\t0\t0")
    return "\n".join(lines) + "\n"


def stats_summary(stats: DatasetStats) -> dict:
    """JSON-ready machine-readable summary."""
    return {
        "count": stats.count,
        "type_counts": {t.value: n for t, n in stats.type_counts.items()},
        "type_distribution": {
            t.value: f for t, f in stats.type_distribution.items()
        },
        "distance_histogram": list(stats.distance_histogram),
        "histogram_bucket_m": 1.0,
    }
