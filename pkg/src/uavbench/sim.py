"""Kinematic UAV world with a rule-based flight oracle.

The vehicle flies in position mode: each control tick it moves straight
toward the commanded pose at up to v_max and turns each attitude axis at up
to omega_max along the shortest arc, arriving exactly when within reach.
There is no inertia; short-range maneuvers at 5 Hz do not need it.

The oracle turns a task into a deterministic pose schedule sampled on the
control grid and anchored at the scenario start, then serves the next chunk
of waypoints relative to the current state.  Schedules keep per-tick motion
inside a cruise margin of the vehicle limits so a healthy closed loop tracks
them exactly.
"""

from __future__ import annotations

import enum
import hashlib
import math
import random
from dataclasses import dataclass, replace

from uavbench import geo
from uavbench.datamodel import (
    ActionChunk,
    Episode,
    EpisodeSource,
    Frame,
    Instruction,
    InstructionForm,
    InvariantViolation,
    ParseError,
    TaskType,
    UavState,
    fmt_angle,
    fmt_fixed,
    make_instruction,
)
from uavbench.errors import HarnessError, Timeout
from uavbench.geo import LocalPose, wrap_angle

MAX_STEP_DT = 0.5


class InvalidDt(HarnessError):
    pass


class UnresolvedTarget(HarnessError):
    pass


class UnsupportedTask(HarnessError):
    pass


@dataclass(frozen=True)
class SimParams:
    """Vehicle and sensing limits shared by the sim and the oracle."""

    v_max: float = 2.0
    omega_max: float = 1.0
    step_dt: float = 0.2
    fov_half: float = 0.7
    view_range: float = 60.0
    cruise_fraction: float = 0.9
    chunk_size: int = 10
    standoff_scale: float = 1.5
    orbit_radius_scale: float = 2.0

    def __post_init__(self) -> None:
        for name in ("v_max", "omega_max", "step_dt", "fov_half", "view_range"):
            if getattr(self, name) <= 0:
                raise InvariantViolation(name, f"{name} must be positive")
        if self.step_dt > MAX_STEP_DT:
            raise InvariantViolation("step_dt", f"step_dt above {MAX_STEP_DT}")
        if not 0 < self.cruise_fraction < 1:
            raise InvariantViolation(
                "cruise_fraction", "cruise_fraction must be in (0, 1)"
            )


DEFAULT_SIM_PARAMS = SimParams()


class ObjectClass(enum.Enum):
    PERSON = "person"
    CAR = "car"
    TREE = "tree"
    MARKER = "marker"
    BUILDING = "building"
    GATE = "gate"


# (radius m, center height m) per class.
CLASS_GEOMETRY: dict[ObjectClass, tuple[float, float]] = {
    ObjectClass.PERSON: (0.4, 0.9),
    ObjectClass.CAR: (1.2, 0.8),
    ObjectClass.TREE: (0.8, 2.0),
    ObjectClass.MARKER: (0.35, 0.3),
    ObjectClass.BUILDING: (4.0, 5.0),
    ObjectClass.GATE: (1.5, 2.0),
}


@dataclass(frozen=True)
class SceneObject:
    id: str
    cls: ObjectClass
    x: float
    y: float
    z: float
    radius: float

    def __post_init__(self) -> None:
        if not self.id or any(ch in self.id for ch in "\t\n "):
            raise InvariantViolation("id", f"bad object id {self.id!r}")
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise InvariantViolation(
                "radius", f"object radius must be positive: {self.radius!r}"
            )

    @property
    def position(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class ScenarioSpec:
    objects: tuple[SceneObject, ...]
    uav_start: LocalPose
    seed: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "objects", tuple(self.objects))
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise InvariantViolation("objects", "duplicate object ids in scenario")
        if self.uav_start.z < 0:
            raise InvariantViolation(
                "uav_start", "uav_start must be at or above ground (z >= 0)"
            )

    def object_by_id(self, object_id: str) -> SceneObject:
        for o in self.objects:
            if o.id == object_id:
                return o
        raise UnresolvedTarget(f"no scene object with id {object_id!r}")


@dataclass(frozen=True)
class World:
    spec: ScenarioSpec
    uav: UavState
    clock: float


def make_world(spec: ScenarioSpec) -> World:
    return World(
        spec=spec,
        uav=UavState(t=0.0, pose=spec.uav_start, velocity=(0.0, 0.0, 0.0)),
        clock=0.0,
    )


class CommandMode(enum.Enum):
    POSITION_HOLD = "hold"
    GOTO = "goto"


@dataclass(frozen=True)
class ControlCommand:
    mode: CommandMode
    target: LocalPose | None = None


HOLD = ControlCommand(CommandMode.POSITION_HOLD)


def goto(target: LocalPose) -> ControlCommand:
    return ControlCommand(CommandMode.GOTO, target)


@dataclass(frozen=True)
class Sighting:
    id: str
    cls: ObjectClass
    bearing: float  # radians, positive left of body forward
    elevation: float
    range: float


@dataclass(frozen=True)
class Observation:
    pose: LocalPose
    visible: tuple[Sighting, ...]


def _toward_angle(current: float, target: float, limit: float) -> float:
    d = wrap_angle(target - current)
    if abs(d) <= limit:
        return wrap_angle(target)
    return wrap_angle(current + math.copysign(limit, d))


def step(
    w: World,
    cmd: ControlCommand,
    dt: float,
    params: SimParams = DEFAULT_SIM_PARAMS,
) -> World:
    """Advance one control interval.  dt must be in (0, 0.5]."""
    if not (math.isfinite(dt) and 0.0 < dt <= MAX_STEP_DT):
        raise InvalidDt(f"dt must be in (0, {MAX_STEP_DT}]: {dt!r}")
    pose = w.uav.pose
    if cmd.mode is CommandMode.POSITION_HOLD or cmd.target is None:
        new_pose = pose
        velocity = (0.0, 0.0, 0.0)
    else:
        t = cmd.target
        dx, dy, dz = t.x - pose.x, t.y - pose.y, t.z - pose.z
        dist = math.sqrt(dx * dx + dy * dy + dz * dz)
        reach = params.v_max * dt
        if dist <= reach:
            nx, ny, nz = t.x, t.y, t.z
        else:
            s = reach / dist
            nx, ny, nz = pose.x + dx * s, pose.y + dy * s, pose.z + dz * s
        limit = params.omega_max * dt
        new_pose = LocalPose(
            x=nx,
            y=ny,
            z=nz,
            roll=_toward_angle(pose.roll, t.roll, limit),
            pitch=_toward_angle(pose.pitch, t.pitch, limit),
            yaw=_toward_angle(pose.yaw, t.yaw, limit),
        )
        velocity = (
            (new_pose.x - pose.x) / dt,
            (new_pose.y - pose.y) / dt,
            (new_pose.z - pose.z) / dt,
        )
    clock = w.clock + dt
    return World(
        spec=w.spec,
        uav=UavState(t=clock, pose=new_pose, velocity=velocity),
        clock=clock,
    )


def observe(w: World, params: SimParams = DEFAULT_SIM_PARAMS) -> Observation:
    """Ground-truth sightings inside a forward cone, nearest first."""
    pose = w.uav.pose
    visible = []
    for obj in w.spec.objects:
        dx, dy, dz = obj.x - pose.x, obj.y - pose.y, obj.z - pose.z
        rng = math.sqrt(dx * dx + dy * dy + dz * dz)
        bearing = wrap_angle(math.atan2(dy, dx) - pose.yaw)
        elevation = math.atan2(dz, math.hypot(dx, dy))
        if rng <= params.view_range and abs(bearing) <= params.fov_half:
            visible.append(
                Sighting(
                    id=obj.id, cls=obj.cls, bearing=bearing,
                    elevation=elevation, range=rng,
                )
            )
    visible.sort(key=lambda s: (s.range, s.id))
    return Observation(pose=pose, visible=tuple(visible))


# --- canonical task schedules ------------------------------------------------

_MAX_SCHEDULE_TICKS = 1500


def _advance_to(points: list[LocalPose], goal: LocalPose, params: SimParams) -> None:
    """Append ticks walking from points[-1] to goal inside cruise limits."""
    v_step = params.cruise_fraction * params.v_max * params.step_dt
    w_step = params.cruise_fraction * params.omega_max * params.step_dt
    cur = points[-1]
    while True:
        dx, dy, dz = goal.x - cur.x, goal.y - cur.y, goal.z - cur.z
        dist = math.sqrt(dx * dx + dy * dy + dz * dz)
        dr = wrap_angle(goal.roll - cur.roll)
        dp = wrap_angle(goal.pitch - cur.pitch)
        dyaw = wrap_angle(goal.yaw - cur.yaw)
        if dist <= 1e-9 and max(abs(dr), abs(dp), abs(dyaw)) <= 1e-9:
            return
        if dist <= v_step:
            nx, ny, nz = goal.x, goal.y, goal.z
        else:
            s = v_step / dist
            nx, ny, nz = cur.x + dx * s, cur.y + dy * s, cur.z + dz * s
        cur = LocalPose(
            x=nx,
            y=ny,
            z=nz,
            roll=_toward_angle(cur.roll, goal.roll, w_step),
            pitch=_toward_angle(cur.pitch, goal.pitch, w_step),
            yaw=_toward_angle(cur.yaw, goal.yaw, w_step),
        )
        points.append(cur)
        if len(points) > _MAX_SCHEDULE_TICKS:
            raise Timeout("task schedule exceeds the time budget")


def _heading_to(from_x: float, from_y: float, to_x: float, to_y: float) -> float:
    return math.atan2(to_y - from_y, to_x - from_x)


def _require_target(task: Instruction, spec: ScenarioSpec, key: str) -> SceneObject:
    object_id = task.params.get(key)
    if not object_id:
        raise UnresolvedTarget(f"task {task.task_type.value} missing {key} binding")
    return spec.object_by_id(object_id)


def _orbit_radius(task: Instruction, obj: SceneObject, params: SimParams) -> float:
    return float(task.params.get("distance") or params.orbit_radius_scale * obj.radius)


def build_schedule(
    task: Instruction,
    spec: ScenarioSpec,
    params: SimParams = DEFAULT_SIM_PARAMS,
) -> list[LocalPose]:
    """World-frame pose per control tick for the canonical execution of task.

    Index k is the pose scheduled for time k * step_dt; index 0 is the
    scenario start pose.
    """
    start = spec.uav_start
    points = [start]
    task_type = task.task_type
    p = task.params

    if task_type is TaskType.TAKEOFF:
        _advance_to(points, replace(start, z=start.z + float(p["distance"])), params)

    elif task_type is TaskType.TRANSLATE:
        heading = start.yaw + float(p["angle"])
        d = float(p["distance"])
        goal = replace(
            start,
            x=start.x + d * math.cos(heading),
            y=start.y + d * math.sin(heading),
        )
        _advance_to(points, goal, params)

    elif task_type is TaskType.ROTATE:
        _advance_to(points, replace(start, yaw=start.yaw + float(p["angle"])), params)

    elif task_type is TaskType.DIVE:
        d = float(p["distance"])
        goal = replace(
            start,
            x=start.x + d * math.cos(start.yaw),
            y=start.y + d * math.sin(start.yaw),
            z=start.z - d,
        )
        _advance_to(points, goal, params)

    elif task_type is TaskType.APPROACH:
        obj = _require_target(task, spec, "target")
        dx, dy, dz = obj.x - start.x, obj.y - start.y, obj.z - start.z
        dist = math.sqrt(dx * dx + dy * dy + dz * dz)
        standoff = params.standoff_scale * obj.radius
        if dist <= standoff:
            raise UnresolvedTarget(
                f"start is already inside the approach standoff of {obj.id!r}"
            )
        s = (dist - standoff) / dist
        yaw = _heading_to(start.x, start.y, obj.x, obj.y)
        goal = LocalPose(
            x=start.x + dx * s, y=start.y + dy * s, z=start.z + dz * s,
            roll=0.0, pitch=0.0, yaw=yaw,
        )
        _advance_to(points, replace(start, yaw=yaw), params)
        _advance_to(points, goal, params)

    elif task_type is TaskType.ORBIT:
        obj = _require_target(task, spec, "target")
        rho = _orbit_radius(task, obj, params)
        alpha0 = math.atan2(start.y - obj.y, start.x - obj.x)
        # Face the center, then sweep one full clockwise circle at a tick
        # angle that divides a quarter turn exactly.
        _advance_to(points, replace(start, yaw=wrap_angle(alpha0 + math.pi)), params)
        d_max = min(
            params.cruise_fraction * params.v_max * params.step_dt / rho,
            params.cruise_fraction * params.omega_max * params.step_dt,
        )
        m = max(1, math.ceil((math.pi / 2) / d_max))
        delta = (math.pi / 2) / m
        for k in range(1, 4 * m + 1):
            a = alpha0 - k * delta
            points.append(
                LocalPose(
                    x=obj.x + rho * math.cos(a),
                    y=obj.y + rho * math.sin(a),
                    z=start.z,
                    roll=0.0,
                    pitch=0.0,
                    yaw=wrap_angle(a + math.pi),
                )
            )

    elif task_type is TaskType.PASS_SIDE:
        obj = _require_target(task, spec, "target")
        u = (obj.x - start.x, obj.y - start.y)
        along = math.hypot(*u)
        if along <= 1e-6:
            raise UnresolvedTarget(f"start sits on top of {obj.id!r}")
        ux, uy = u[0] / along, u[1] / along
        sign = 1.0 if p["side"] == "left" else -1.0
        nx, ny = -uy * sign, ux * sign
        clearance = params.standoff_scale * obj.radius
        yaw = math.atan2(uy, ux)
        shift = LocalPose(
            x=start.x + nx * clearance, y=start.y + ny * clearance, z=start.z,
            roll=0.0, pitch=0.0, yaw=yaw,
        )
        beyond = along + 2.0 * obj.radius
        goal = replace(shift, x=shift.x + ux * beyond, y=shift.y + uy * beyond)
        _advance_to(points, shift, params)
        _advance_to(points, goal, params)

    elif task_type is TaskType.FLY_BETWEEN:
        a = _require_target(task, spec, "target")
        b = _require_target(task, spec, "target_b")
        mx, my = (a.x + b.x) / 2.0, (a.y + b.y) / 2.0
        yaw = _heading_to(start.x, start.y, mx, my)
        gap = math.hypot(mx - start.x, my - start.y)
        if gap <= 1e-6:
            raise UnresolvedTarget("start already sits on the gap midpoint")
        ux, uy = (mx - start.x) / gap, (my - start.y) / gap
        goal = LocalPose(
            x=mx + 2.0 * ux, y=my + 2.0 * uy, z=start.z,
            roll=0.0, pitch=0.0, yaw=yaw,
        )
        _advance_to(points, replace(start, yaw=yaw), params)
        _advance_to(points, goal, params)

    elif task_type is TaskType.HOVER_BESIDE:
        obj = _require_target(task, spec, "target")
        u = (obj.x - start.x, obj.y - start.y)
        along = math.hypot(*u)
        if along <= 1e-6:
            raise UnresolvedTarget(f"start sits on top of {obj.id!r}")
        ux, uy = u[0] / along, u[1] / along
        sign = 1.0 if p["side"] == "left" else -1.0
        nx, ny = -uy * sign, ux * sign
        offset = params.standoff_scale * obj.radius
        gx, gy = obj.x + nx * offset, obj.y + ny * offset
        _advance_to(
            points, replace(start, yaw=_heading_to(start.x, start.y, gx, gy)), params
        )
        _advance_to(
            points,
            LocalPose(
                x=gx, y=gy, z=start.z, roll=0.0, pitch=0.0,
                yaw=_heading_to(start.x, start.y, gx, gy),
            ),
            params,
        )
        hold_yaw = _heading_to(gx, gy, obj.x, obj.y)
        _advance_to(points, replace(points[-1], yaw=hold_yaw), params)
        # Dwell for over a second so the hover is measurable.
        points.extend([points[-1]] * 6)

    elif task_type is TaskType.FACE_TARGET:
        obj = _require_target(task, spec, "target")
        yaw = _heading_to(start.x, start.y, obj.x, obj.y)
        _advance_to(points, replace(start, yaw=yaw), params)

    else:  # pragma: no cover - TaskType is closed
        raise UnsupportedTask(f"no oracle for task type {task_type!r}")

    return points


def oracle_policy(
    task: Instruction,
    w: World,
    *,
    params: SimParams = DEFAULT_SIM_PARAMS,
) -> ActionChunk:
    """Next waypoint chunk along the canonical schedule, in body frame.

    Emits an empty chunk once the schedule is exhausted (task complete).
    """
    schedule = build_schedule(task, w.spec, params)
    k_now = int(math.floor(w.clock / params.step_dt + 1e-6))
    upcoming = schedule[k_now + 1 : k_now + 1 + params.chunk_size]
    targets = tuple(geo.body_offset(w.uav.pose, pt) for pt in upcoming)
    return ActionChunk(
        t_inf=w.clock, anchor=w.uav, targets=targets, step_dt=params.step_dt
    )


def generate_episode(
    task: Instruction,
    spec: ScenarioSpec,
    *,
    params: SimParams = DEFAULT_SIM_PARAMS,
    episode_id: str | None = None,
    timeout: float = 60.0,
) -> Episode:
    """Closed-loop rollout of the oracle at 5 Hz, recorded start-relative."""
    eid = episode_id or f"{task.task_type.value}-s{spec.seed}"
    w = make_world(spec)
    frames = [
        Frame(t=0.0, pose=LocalPose(0, 0, 0, 0, 0, 0), obs_ref=f"sim:{eid}:{0:04d}")
    ]
    k = 0
    while True:
        chunk = oracle_policy(task, w, params=params)
        if not chunk.targets:
            break
        if w.clock >= timeout - 1e-9:
            raise Timeout(f"episode {eid} still running at {timeout} s; discarded")
        target = geo.compose_pose(w.uav.pose, chunk.targets[0])
        w = step(w, goto(target), params.step_dt, params)
        k += 1
        frames.append(
            Frame(
                t=k * params.step_dt,
                pose=geo.pose_delta(spec.uav_start, w.uav.pose),
                obs_ref=f"sim:{eid}:{k:04d}",
            )
        )
    return Episode(
        id=eid,
        instruction=task,
        origin=None,
        frames=tuple(frames),
        source=EpisodeSource.SIM_RULE,
    )


# --- scenario generation and file format -------------------------------------


def _task_rng(task_type: TaskType, seed: int) -> random.Random:
    key = f"{task_type.value}:{seed}".encode()
    return random.Random(int.from_bytes(hashlib.sha256(key).digest()[:8], "big"))


def scenario_for_task(
    task_type: TaskType,
    seed: int,
    params: SimParams = DEFAULT_SIM_PARAMS,
) -> tuple[Instruction, ScenarioSpec]:
    """Deterministic canonical scene plus instruction for (task_type, seed)."""
    rng = _task_rng(task_type, seed)
    yaw0 = round(rng.uniform(-3.1, 3.1), 3)
    z0 = round(rng.uniform(2.0, 3.5), 2)
    objects: list[SceneObject] = []
    task_params: dict = {}

    def place(cls: ObjectClass, distance: float, bearing_offset: float = 0.0,
              suffix: str = "") -> SceneObject:
        radius, center_z = CLASS_GEOMETRY[cls]
        heading = yaw0 + bearing_offset
        obj = SceneObject(
            id=cls.value + suffix,
            cls=cls,
            x=round(distance * math.cos(heading), 6),
            y=round(distance * math.sin(heading), 6),
            z=center_z,
            radius=radius,
        )
        objects.append(obj)
        return obj

    if task_type is TaskType.TAKEOFF:
        z0 = 0.5
        task_params = {"distance": rng.choice([3.0, 4.0, 4.5, 5.0, 6.0])}
    elif task_type is TaskType.TRANSLATE:
        task_params = {
            "distance": rng.choice([2.0, 3.0, 4.0, 5.0, 6.5, 8.0]),
            "angle": rng.choice([0.0, math.pi / 2, -math.pi / 2, math.pi]),
        }
    elif task_type is TaskType.ROTATE:
        degrees = rng.choice([45.0, 90.0, 135.0, 180.0])
        sign = rng.choice([1.0, -1.0]) if degrees < 180.0 else 1.0
        task_params = {"angle": sign * math.radians(degrees)}
    elif task_type is TaskType.DIVE:
        d = rng.choice([2.0, 2.5, 3.0, 4.0])
        z0 = round(d + rng.uniform(1.0, 2.0), 2)
        task_params = {"distance": d}
    elif task_type is TaskType.APPROACH:
        cls = rng.choice([ObjectClass.PERSON, ObjectClass.CAR, ObjectClass.TREE,
                          ObjectClass.MARKER])
        obj = place(cls, rng.uniform(6.0, 10.0))
        task_params = {"target": obj.id}
    elif task_type is TaskType.ORBIT:
        cls = rng.choice([ObjectClass.PERSON, ObjectClass.CAR, ObjectClass.TREE])
        radius, _ = CLASS_GEOMETRY[cls]
        rho = params.orbit_radius_scale * radius
        obj = place(cls, rho)  # start sits exactly on the orbit circle
        task_params = {"target": obj.id}
    elif task_type is TaskType.PASS_SIDE:
        cls = rng.choice([ObjectClass.PERSON, ObjectClass.CAR, ObjectClass.TREE])
        obj = place(cls, rng.uniform(6.0, 9.0))
        task_params = {"target": obj.id, "side": rng.choice(["left", "right"])}
    elif task_type is TaskType.FLY_BETWEEN:
        cls = rng.choice([ObjectClass.TREE, ObjectClass.GATE, ObjectClass.CAR])
        distance = rng.uniform(7.0, 9.0)
        gap = rng.uniform(3.0, 5.0)
        radius, center_z = CLASS_GEOMETRY[cls]
        mx, my = distance * math.cos(yaw0), distance * math.sin(yaw0)
        nx, ny = -math.sin(yaw0), math.cos(yaw0)
        for suffix, s in (("-a", 1.0), ("-b", -1.0)):
            objects.append(
                SceneObject(
                    id=cls.value + suffix,
                    cls=cls,
                    x=round(mx + nx * s * gap / 2, 6),
                    y=round(my + ny * s * gap / 2, 6),
                    z=center_z,
                    radius=radius,
                )
            )
        task_params = {"target": objects[0].id, "target_b": objects[1].id}
    elif task_type is TaskType.HOVER_BESIDE:
        cls = rng.choice([ObjectClass.PERSON, ObjectClass.CAR, ObjectClass.TREE])
        obj = place(cls, rng.uniform(5.0, 8.0))
        task_params = {"target": obj.id, "side": rng.choice(["left", "right"])}
    elif task_type is TaskType.FACE_TARGET:
        cls = rng.choice([ObjectClass.PERSON, ObjectClass.CAR, ObjectClass.TREE,
                          ObjectClass.MARKER])
        bearing = rng.choice([1.0, -1.0]) * rng.uniform(0.3, 0.6)
        obj = place(cls, rng.uniform(6.0, 10.0), bearing_offset=bearing)
        task_params = {"target": obj.id}
    else:  # pragma: no cover - TaskType is closed
        raise UnsupportedTask(str(task_type))

    spec = ScenarioSpec(
        objects=tuple(objects),
        uav_start=LocalPose(0.0, 0.0, z0, 0.0, 0.0, yaw0),
        seed=seed,
    )
    return make_instruction(task_type, task_params, InstructionForm.FIXED), spec


def render_scenario(spec: ScenarioSpec) -> str:
    s = spec.uav_start
    lines = [
        f"seed\t{spec.seed}",
        "uav_start\t" + "\t".join(
            (
                *(fmt_fixed(v) for v in (s.x, s.y, s.z)),
                *(fmt_angle(v) for v in (s.roll, s.pitch, s.yaw)),
            )
        ),
    ]
    for o in sorted(spec.objects, key=lambda o: o.id):
        lines.append(
            f"object\t{o.id}\t{o.cls.value}\t"
            + "\t".join(fmt_fixed(v) for v in (o.x, o.y, o.z, o.radius))
        )
    return "\n".join(lines) + "\n"


def parse_scenario(text: str) -> ScenarioSpec:
    seed: int | None = None
    uav_start: LocalPose | None = None
    objects: list[SceneObject] = []
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip("\r")
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        kind = parts[0]
        try:
            if kind == "seed" and len(parts) == 2:
                seed = int(parts[1])
            elif kind == "uav_start" and len(parts) == 7:
                uav_start = LocalPose(*(float(v) for v in parts[1:7]))
            elif kind == "object" and len(parts) == 7:
                objects.append(
                    SceneObject(
                        id=parts[1],
                        cls=ObjectClass(parts[2]),
                        x=float(parts[3]),
                        y=float(parts[4]),
                        z=float(parts[5]),
                        radius=float(parts[6]),
                    )
                )
            else:
                raise ValueError(f"unknown row {kind!r}")
        except (ValueError, HarnessError) as e:
            raise ParseError(i, str(e))
    if seed is None or uav_start is None:
        raise ParseError(0, "scenario needs seed and uav_start rows")
    return ScenarioSpec(objects=tuple(objects), uav_start=uav_start, seed=seed)
