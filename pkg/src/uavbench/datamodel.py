"""Core record types and the on-disk episode format.

An episode is one flight segment: an instruction, an optional global origin
pose, and a 5 Hz sequence of frames in the flight-local frame.  Episodes
serialize to line-delimited UTF-8 text with a single tab-separated header
line followed by one frame per line.  All float fields use fixed-width
decimal formatting so that equal episodes always produce identical bytes.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

from uavbench.errors import HarnessError
from uavbench.geo import GeoPose, LocalPose, wrap_angle

CONTROL_RATE_HZ = 5.0
FRAME_SPACING_S = 1.0 / CONTROL_RATE_HZ
SPACING_TOL_S = 1e-6

# Sanity bounds for validate_episode, not type invariants.
MAX_PATH_LENGTH_M = 200.0
STEP_SLACK = 1.5

_MAGIC = "ep1"
MANIFEST_NAME = "manifest.tsv"


class InvariantViolation(HarnessError):
    def __init__(self, field_name: str, detail: str = ""):
        self.field = field_name
        super().__init__(detail or field_name)


class ParseError(HarnessError):
    def __init__(self, line: int, reason: str):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class TaskType(enum.Enum):
    TAKEOFF = "takeoff"
    TRANSLATE = "translate"
    ROTATE = "rotate"
    DIVE = "dive"
    APPROACH = "approach"
    ORBIT = "orbit"
    PASS_SIDE = "pass_side"
    FLY_BETWEEN = "fly_between"
    HOVER_BESIDE = "hover_beside"
    FACE_TARGET = "face_target"


class InstructionForm(enum.Enum):
    FIXED = "fixed"
    OPEN_VOCAB = "open_vocab"


class EpisodeSource(enum.Enum):
    REAL_LOG = "real_log"
    SIM_MANUAL = "sim_manual"
    SIM_RULE = "sim_rule"


# Parameter schema per task: (required keys, optional keys).  Values are
# floats for distance (meters) and angle (radians), strings for side and
# target object ids.
PARAM_SCHEMA: dict[TaskType, tuple[frozenset[str], frozenset[str]]] = {
    TaskType.TAKEOFF: (frozenset({"distance"}), frozenset()),
    TaskType.TRANSLATE: (frozenset({"distance", "angle"}), frozenset()),
    TaskType.ROTATE: (frozenset({"angle"}), frozenset()),
    TaskType.DIVE: (frozenset({"distance"}), frozenset()),
    TaskType.APPROACH: (frozenset({"target"}), frozenset()),
    TaskType.ORBIT: (frozenset({"target"}), frozenset({"distance"})),
    TaskType.PASS_SIDE: (frozenset({"target", "side"}), frozenset()),
    TaskType.FLY_BETWEEN: (frozenset({"target", "target_b"}), frozenset()),
    TaskType.HOVER_BESIDE: (frozenset({"target", "side"}), frozenset()),
    TaskType.FACE_TARGET: (frozenset({"target"}), frozenset()),
}

_FLOAT_PARAMS = {"distance", "angle"}
_SIDES = ("left", "right")

# Canonical fixed-form command per task.  Placeholders are filled by
# render_command; object references stay generic because the binding to a
# concrete scene object lives in the params, not the text.
COMMAND_TEMPLATES: dict[TaskType, str] = {
    TaskType.TAKEOFF: "take off to {distance} meters",
    TaskType.TRANSLATE: "move {distance} meters {direction}",
    TaskType.ROTATE: "rotate {degrees} degrees to the {turn}",
    TaskType.DIVE: "dive down {distance} meters",
    TaskType.APPROACH: "fly to the object",
    TaskType.ORBIT: "fly around the object",
    TaskType.PASS_SIDE: "fly through the {side} side of the object",
    TaskType.FLY_BETWEEN: "fly between the two objects",
    TaskType.HOVER_BESIDE: "hover to the {side} of the object",
    TaskType.FACE_TARGET: "turn to face the object",
}

# Body-frame headings that read as words instead of degrees.
_DIRECTION_WORDS = (
    (0.0, "forward"),
    (math.pi / 2, "to the left"),
    (-math.pi / 2, "to the right"),
    (math.pi, "backward"),
)
_DIRECTION_TOL = 1e-4


def format_quantity(x: float) -> str:
    """Render a numeric parameter the way command text spells it.

    Snaps to 3 decimals first so that values quantized by the file format
    render identically to their originals.
    """
    return format(round(float(x), 3) + 0.0, "g")


def direction_phrase(angle: float) -> str:
    a = wrap_angle(angle)
    for ref, word in _DIRECTION_WORDS:
        if abs(wrap_angle(a - ref)) < _DIRECTION_TOL:
            return word
    return f"at {format_quantity(math.degrees(a))} degrees"


def render_command(template: str, task_type: TaskType, params: dict) -> str:
    """Fill a command template from task parameters."""
    fields: dict[str, str] = {}
    if "distance" in params:
        fields["distance"] = format_quantity(params["distance"])
    if "angle" in params:
        angle = float(params["angle"])
        fields["degrees"] = format_quantity(abs(math.degrees(wrap_angle(angle))))
        fields["turn"] = "left" if wrap_angle(angle) > 0 else "right"
        fields["direction"] = direction_phrase(angle)
    if "side" in params:
        fields["side"] = str(params["side"])
    try:
        return template.format(**fields)
    except KeyError as e:
        raise InvariantViolation("params", f"template needs {e} but params lack it")


def canonical_text(task_type: TaskType, params: dict) -> str:
    """The byte-exact fixed-form command for a task."""
    return render_command(COMMAND_TEMPLATES[task_type], task_type, params)


def _check_params(task_type: TaskType, params: dict) -> None:
    required, optional = PARAM_SCHEMA[task_type]
    keys = set(params)
    missing = required - keys
    if missing:
        raise InvariantViolation(
            "params", f"{task_type.value} missing params: {sorted(missing)}"
        )
    unknown = keys - required - optional
    if unknown:
        raise InvariantViolation(
            "params", f"{task_type.value} has unknown params: {sorted(unknown)}"
        )
    for k, v in params.items():
        if k in _FLOAT_PARAMS:
            if not isinstance(v, (int, float)) or not math.isfinite(float(v)):
                raise InvariantViolation("params", f"param {k} must be finite number")
        else:
            if not isinstance(v, str) or not v:
                raise InvariantViolation("params", f"param {k} must be non-empty text")
            if any(ch in v for ch in "\t\n;="):
                raise InvariantViolation("params", f"param {k} has reserved characters")
    if "side" in params and params["side"] not in _SIDES:
        raise InvariantViolation("params", f"side must be one of {_SIDES}")


@dataclass(frozen=True)
class Instruction:
    """A natural-language command plus its structured task binding."""

    text: str
    task_type: TaskType
    form: InstructionForm
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.text:
            raise InvariantViolation("text", "instruction text is empty")
        if any(ch in self.text for ch in "\t\n"):
            raise InvariantViolation("text", "instruction text has tab or newline")
        _check_params(self.task_type, self.params)
        if self.form is InstructionForm.FIXED:
            expect = canonical_text(self.task_type, self.params)
            if self.text != expect:
                raise InvariantViolation(
                    "text",
                    f"fixed-form text {self.text!r} differs from canonical {expect!r}",
                )


def make_instruction(
    task_type: TaskType,
    params: dict,
    form: InstructionForm = InstructionForm.FIXED,
    text: str | None = None,
) -> Instruction:
    if text is None:
        text = canonical_text(task_type, params)
    return Instruction(text=text, task_type=task_type, form=form, params=params)


@dataclass(frozen=True)
class Frame:
    """One 5 Hz sample: seconds since episode start, local pose, and an
    opaque reference to the camera frame observed at that tick."""

    t: float
    pose: LocalPose
    obs_ref: str


MAX_CHUNK_TARGETS = 64


@dataclass(frozen=True)
class UavState:
    """Instantaneous vehicle state: time, pose, and velocity in m/s."""

    t: float
    pose: LocalPose
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "velocity", tuple(self.velocity))
        if len(self.velocity) != 3 or not all(
            math.isfinite(v) for v in self.velocity
        ):
            raise InvariantViolation("velocity", "velocity must be 3 finite floats")
        if not math.isfinite(self.t):
            raise InvariantViolation("t", "state time must be finite")

    @property
    def speed(self) -> float:
        return math.hypot(*self.velocity)


@dataclass(frozen=True)
class ActionChunk:
    """A burst of body-frame waypoints from one inference call.

    targets are offsets relative to the anchor state (the state the policy
    saw).  Scheduled arrival times step at step_dt from t_inf.  An empty
    target tuple is the task-complete sentinel; motion chunks carry 1 to 64
    targets.
    """

    t_inf: float
    anchor: UavState
    targets: tuple[LocalPose, ...]
    step_dt: float = FRAME_SPACING_S

    def __post_init__(self) -> None:
        object.__setattr__(self, "targets", tuple(self.targets))
        if len(self.targets) > MAX_CHUNK_TARGETS:
            raise InvariantViolation(
                "targets", f"{len(self.targets)} targets exceeds {MAX_CHUNK_TARGETS}"
            )
        if not (math.isfinite(self.step_dt) and self.step_dt > 0):
            raise InvariantViolation("step_dt", f"bad step_dt {self.step_dt!r}")
        if not math.isfinite(self.t_inf):
            raise InvariantViolation("t_inf", "t_inf must be finite")


@dataclass(frozen=True)
class Episode:
    id: str
    instruction: Instruction
    origin: GeoPose | None
    frames: tuple[Frame, ...]
    source: EpisodeSource

    def __post_init__(self) -> None:
        object.__setattr__(self, "frames", tuple(self.frames))


def _is_zero_pose(p: LocalPose) -> bool:
    return (
        p.x == 0.0
        and p.y == 0.0
        and p.z == 0.0
        and p.roll == 0.0
        and p.pitch == 0.0
        and p.yaw == 0.0
    )


def _core_violations(e: Episode) -> list[tuple[str, str]]:
    """(field, message) pairs for type-invariant breaches."""
    out: list[tuple[str, str]] = []
    if not e.id or any(ch in e.id for ch in "\t\n"):
        out.append(("id", "episode id empty or has reserved characters"))
    if len(e.frames) < 2:
        out.append(("frame count", "frame count < 2"))
    if e.frames and not _is_zero_pose(e.frames[0].pose):
        out.append(("origin", "first frame pose is not the zero pose"))
    for i, f in enumerate(e.frames):
        if f.t < 0 or not math.isfinite(f.t):
            out.append(("t range", f"frame {i}: t {f.t!r} not in [0, inf)"))
            break
    for i in range(1, len(e.frames)):
        if not e.frames[i].t > e.frames[i - 1].t:
            out.append(("t order", f"frame {i}: t not strictly increasing"))
            break
    for i in range(1, len(e.frames)):
        dt = e.frames[i].t - e.frames[i - 1].t
        if abs(dt - FRAME_SPACING_S) > SPACING_TOL_S:
            out.append(
                ("spacing", f"frame {i}: spacing {dt:.6f} not {FRAME_SPACING_S:.3f}")
            )
            break
    for i, f in enumerate(e.frames):
        if "\t" in f.obs_ref or "\n" in f.obs_ref:
            out.append(("obs_ref", f"frame {i}: obs_ref has reserved characters"))
            break
    return out


def _step_length(a: LocalPose, b: LocalPose) -> float:
    return math.dist(a.position, b.position)


def validate_episode(e: Episode, v_max: float = 2.0) -> list[str]:
    """All invariant breaches plus sanity-bound breaches, as messages.

    Empty list means the episode is well-formed: core invariants hold,
    every inter-frame displacement fits v_max with 50% slack, and the total
    path length stays under 200 m.
    """
    out = [msg for _, msg in _core_violations(e)]
    bound = v_max * FRAME_SPACING_S * STEP_SLACK
    total = 0.0
    for i in range(1, len(e.frames)):
        d = _step_length(e.frames[i - 1].pose, e.frames[i].pose)
        total += d
        if d > bound:
            out.append(
                f"step displacement {d:g} > {bound:g} (frame {i})"
            )
    if total > MAX_PATH_LENGTH_M:
        out.append(f"path length {total:g} > {MAX_PATH_LENGTH_M:g}")
    return out


def path_length(e: Episode) -> float:
    return sum(
        _step_length(e.frames[i - 1].pose, e.frames[i].pose)
        for i in range(1, len(e.frames))
    )


def fmt_fixed(x: float, places: int = 6) -> str:
    text = format(float(x), f".{places}f")
    # Tiny negatives and -0.0 round to "-0.000000", which would reparse as
    # -0.0 and re-encode without the sign; normalize after rounding.
    if text.startswith("-") and float(text) == 0.0:
        text = text[1:]
    return text


def _floor_pi(places: int) -> float:
    scale = 10**places
    return math.floor(math.pi * scale) / scale


_PI_FLOOR = {6: _floor_pi(6), 9: _floor_pi(9)}


def fmt_angle(x: float, places: int = 6) -> str:
    """Fixed-decimal encoding of a wrapped angle, stable under reparsing.

    Plain rounding can push a value just inside +/-pi over the wrap boundary;
    the reparsed value would then wrap to the other sign and re-encode
    differently.  Clamping the encoded magnitude to pi makes every emitted
    text a fixed point of encode(parse(text)).
    """
    text = fmt_fixed(x, places)
    if abs(float(text)) > math.pi:
        text = fmt_fixed(math.copysign(_PI_FLOOR[places], x), places)
    return text


def _render_params(params: dict) -> str:
    if not params:
        return "-"
    parts = []
    for k in sorted(params):
        v = params[k]
        if k == "angle":
            v = fmt_angle(v)
        elif k in _FLOAT_PARAMS:
            v = fmt_fixed(v)
        parts.append(f"{k}={v}")
    return ";".join(parts)


def _parse_params(text: str, line: int) -> dict:
    if text == "-":
        return {}
    params: dict = {}
    for part in text.split(";"):
        if "=" not in part:
            raise ParseError(line, f"bad param {part!r}")
        k, v = part.split("=", 1)
        if k in _FLOAT_PARAMS:
            try:
                params[k] = float(v)
            except ValueError:
                raise ParseError(line, f"bad numeric param {part!r}")
        else:
            params[k] = v
    return params


def _render_origin(origin: GeoPose | None) -> str:
    if origin is None:
        return "-"
    fixed = (fmt_fixed(v, 9) for v in (origin.lat, origin.lon, origin.alt))
    angles = (fmt_angle(v, 9) for v in (origin.roll, origin.pitch, origin.yaw))
    return ",".join((*fixed, *angles))


def _parse_origin(text: str, line: int) -> GeoPose | None:
    if text == "-":
        return None
    parts = text.split(",")
    if len(parts) != 6:
        raise ParseError(line, "origin needs 6 comma-separated fields")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ParseError(line, f"bad origin value in {text!r}")
    try:
        return GeoPose(*vals)
    except HarnessError as e:
        raise ParseError(line, f"bad origin pose: {e}")


def serialize_episode(e: Episode) -> bytes:
    """Deterministic byte encoding; raises InvariantViolation on bad input."""
    violations = _core_violations(e)
    if violations:
        field_name, msg = violations[0]
        raise InvariantViolation(field_name, msg)
    ins = e.instruction
    header = "\t".join(
        (
            _MAGIC,
            e.id,
            e.source.value,
            ins.task_type.value,
            ins.form.value,
            _render_params(ins.params),
            _render_origin(e.origin),
            ins.text,
        )
    )
    lines = [header]
    for f in e.frames:
        p = f.pose
        lines.append(
            "\t".join(
                (
                    fmt_fixed(f.t),
                    fmt_fixed(p.x),
                    fmt_fixed(p.y),
                    fmt_fixed(p.z),
                    fmt_angle(p.roll),
                    fmt_angle(p.pitch),
                    fmt_angle(p.yaw),
                    f.obs_ref,
                )
            )
        )
    return ("\n".join(lines) + "\n").encode("utf-8")


def deserialize_episode(data: bytes) -> Episode:
    """Parse and validate one serialized episode.

    Raises ParseError for malformed lines and InvariantViolation when the
    parsed record breaks episode invariants.
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ParseError(0, f"not valid UTF-8: {e}")
    if not text.endswith("\n"):
        raise ParseError(text.count("\n") + 1, "missing trailing newline")
    lines = text.split("\n")[:-1]
    if not lines:
        raise ParseError(1, "empty file")
    head = lines[0].split("\t")
    if len(head) != 8 or head[0] != _MAGIC:
        raise ParseError(1, "bad header")
    _, ep_id, source_s, task_s, form_s, params_s, origin_s, ins_text = head
    try:
        source = EpisodeSource(source_s)
        task_type = TaskType(task_s)
        form = InstructionForm(form_s)
    except ValueError as e:
        raise ParseError(1, str(e))
    params = _parse_params(params_s, 1)
    origin = _parse_origin(origin_s, 1)
    instruction = Instruction(
        text=ins_text, task_type=task_type, form=form, params=params
    )
    frames = []
    for i, raw in enumerate(lines[1:], start=2):
        parts = raw.split("\t")
        if len(parts) != 8:
            raise ParseError(i, f"frame needs 8 fields, got {len(parts)}")
        try:
            nums = [float(p) for p in parts[:7]]
        except ValueError:
            raise ParseError(i, f"bad frame value in {raw!r}")
        frames.append(
            Frame(t=nums[0], pose=LocalPose(*nums[1:7]), obs_ref=parts[7])
        )
    episode = Episode(
        id=ep_id,
        instruction=instruction,
        origin=origin,
        frames=tuple(frames),
        source=source,
    )
    violations = _core_violations(episode)
    if violations:
        field_name, msg = violations[0]
        raise InvariantViolation(field_name, msg)
    return episode


def write_manifest(directory: Path | str, pattern: str = "*.episode") -> Path:
    """Write manifest.tsv listing episode files with sha256 content hashes."""
    directory = Path(directory)
    rows = []
    for p in sorted(directory.glob(pattern)):
        digest = hashlib.sha256(p.read_bytes()).hexdigest()
        rows.append(f"{digest}\t{p.name}")
    out = directory / MANIFEST_NAME
    out.write_text("\n".join(rows) + ("\n" if rows else ""), encoding="utf-8")
    return out


def verify_manifest(directory: Path | str) -> list[str]:
    """Mismatch messages for a directory against its manifest; empty if clean."""
    directory = Path(directory)
    manifest = directory / MANIFEST_NAME
    if not manifest.exists():
        return [f"missing {MANIFEST_NAME}"]
    problems = []
    for i, row in enumerate(manifest.read_text(encoding="utf-8").splitlines(), 1):
        if not row:
            continue
        try:
            digest, name = row.split("\t")
        except ValueError:
            problems.append(f"manifest line {i}: bad row")
            continue
        p = directory / name
        if not p.exists():
            problems.append(f"{name}: missing file")
        elif hashlib.sha256(p.read_bytes()).hexdigest() != digest:
            problems.append(f"{name}: hash mismatch")
    return problems
