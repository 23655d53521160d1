"""Trajectory scoring and closed-loop evaluation.

Similarity is dynamic time warping over a 6-D embedding of each pose
(position plus orientation cosines), normalized to (0, 1].  Success is
decided by per-task geometric predicates with explicit tolerances, and
`evaluate_suite` drives the control bridge over a set of episodes to
produce a per-task success-rate / NDTW report.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, fields
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from uavbench import sim
from uavbench.bridge.latency import LatencyModel
from uavbench.bridge.policies import Policy
from uavbench.bridge.schemes import SchemeConfig, run_scheme
from uavbench.datamodel import Episode, Instruction, InvariantViolation, TaskType
from uavbench.errors import HarnessError
from uavbench.geo import LocalPose, Vec6, pose_to_vec6, wrap_angle
from uavbench.sim import ScenarioSpec, SceneObject, UnresolvedTarget

__all__ = [
    "DEFAULT_D_TH",
    "DEFAULT_RULES",
    "EmptyTrajectory",
    "EvalCase",
    "EvalResult",
    "SuccessRule",
    "SuiteReport",
    "Trajectory",
    "check_success",
    "dtw",
    "evaluate_suite",
    "ndtw",
    "reference_trajectory",
]

DEFAULT_D_TH = 3.0
"""Distance threshold (meters) that maps DTW cost onto (0, 1]."""


class EmptyTrajectory(HarnessError):
    """A trajectory or embedding sequence with no points was supplied."""


@dataclass(frozen=True)
class Trajectory:
    """An ordered pose sequence, one pose per control tick."""

    points: tuple[LocalPose, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", tuple(self.points))
        if not self.points:
            raise EmptyTrajectory("a trajectory needs at least one pose")

    def __len__(self) -> int:
        return len(self.points)

    def vec6(self) -> list[Vec6]:
        return [pose_to_vec6(p) for p in self.points]


def dtw(a: Sequence[Vec6], b: Sequence[Vec6]) -> float:
    """Minimum-cost monotone alignment between two embedding sequences.

    Classic dynamic time warping: both endpoints matched, steps advance one
    sequence or both, local cost is the Euclidean distance between points.
    """
    if not a or not b:
        raise EmptyTrajectory("dtw needs non-empty sequences on both sides")
    left = np.asarray(a, dtype=float)
    right = np.asarray(b, dtype=float)
    diff = left[:, None, :] - right[None, :, :]
    cost = np.sqrt((diff * diff).sum(axis=2)).tolist()

    m = len(b)
    prev = cost[0]
    for j in range(1, m):
        prev[j] += prev[j - 1]
    for i in range(1, len(a)):
        row = cost[i]
        row[0] += prev[0]
        for j in range(1, m):
            best = prev[j]
            if prev[j - 1] < best:
                best = prev[j - 1]
            if row[j - 1] < best:
                best = row[j - 1]
            row[j] += best
        prev = row
    return prev[-1]


def ndtw(pred: Trajectory, ref: Trajectory, d_th: float = DEFAULT_D_TH) -> float:
    """exp(-dtw / (|ref| * d_th)): 1.0 exactly when the paths coincide."""
    if d_th <= 0:
        raise InvariantViolation("d_th", "distance threshold must be positive")
    cost = dtw(pred.vec6(), ref.vec6())
    return math.exp(-cost / (len(ref) * d_th))


# --- success predicates ------------------------------------------------------------


@dataclass(frozen=True)
class SuccessRule:
    """Tolerances for one task family's geometric success predicate.

    Distances are meters, angles radians, *_tol fractions are relative to
    the commanded magnitude.
    """

    task_type: TaskType
    frac_tol: float = 0.2        # relative error on commanded distance/altitude
    angle_tol: float = math.radians(15.0)
    drift_limit: float = 1.0     # max displacement for in-place tasks
    range_lo: float = 0.5        # final range as a multiple of the standoff
    range_hi: float = 3.0
    sweep_min: float = math.radians(300.0)
    radial_tol: float = 0.3      # orbit radius error relative to commanded radius
    clearance_lo: float = 0.5    # lateral clearance band when passing, meters
    clearance_hi: float = 4.0
    midline_tol: float = 1.0     # offset from the gap midpoint when crossing
    hover_drift: float = 0.3     # max travel during the final window
    offset_tol: float = 0.5      # hover range error relative to commanded offset
    window_s: float = 1.0        # length of the "final second" window

    def __post_init__(self) -> None:
        for f in fields(self):
            if f.name == "task_type":
                continue
            value = getattr(self, f.name)
            if not (isinstance(value, (int, float)) and value > 0):
                raise InvariantViolation(f.name, "rule parameters must be positive")


DEFAULT_RULES: Mapping[TaskType, SuccessRule] = {
    t: (
        SuccessRule(task_type=t, angle_tol=math.radians(10.0))
        if t is TaskType.FACE_TARGET
        else SuccessRule(task_type=t)
    )
    for t in TaskType
}


def _dist3(p: LocalPose, q) -> float:
    return math.dist((p.x, p.y, p.z), (q.x, q.y, q.z))


def _window_start(traj: Trajectory, rule: SuccessRule) -> int:
    ticks = int(round(rule.window_s / sim.DEFAULT_SIM_PARAMS.step_dt))
    return max(0, len(traj) - 1 - ticks)


def _require_object(spec: ScenarioSpec, params: Mapping[str, object], key: str) -> SceneObject:
    name = params.get(key)
    if not isinstance(name, str):
        raise UnresolvedTarget(f"task params are missing object reference {key!r}")
    return spec.object_by_id(name)


def _unit_toward(
    fx: float, fy: float, tx: float, ty: float, what: str
) -> tuple[float, float]:
    dx, dy = tx - fx, ty - fy
    norm = math.hypot(dx, dy)
    if norm <= 1e-9:
        raise UnresolvedTarget(what)
    return dx / norm, dy / norm


def _crossing(
    s: Sequence[float], l: Sequence[float]
) -> float | None:
    """Lateral coordinate interpolated where the along coordinate crosses zero."""
    for k in range(len(s) - 1):
        before, after = s[k], s[k + 1]
        if (before <= 0.0 < after) or (before >= 0.0 > after):
            t = before / (before - after)
            return l[k] + t * (l[k + 1] - l[k])
    return None


def check_success(
    traj: Trajectory,
    task: Instruction,
    spec: ScenarioSpec,
    rule: SuccessRule | None = None,
) -> tuple[bool, list[str]]:
    """Geometric pass/fail for one flown trajectory, with failure diagnostics.

    The trajectory must be in the scenario's world frame.  Returns
    ``(True, [])`` on success, otherwise ``(False, notes)`` with one note
    per violated clause.
    """
    if rule is None:
        rule = DEFAULT_RULES[task.task_type]
    if rule.task_type is not task.task_type:
        raise InvariantViolation(
            "rule", f"rule for {rule.task_type.value} applied to {task.task_type.value}"
        )
    pts = traj.points
    start, end = pts[0], pts[-1]
    p = task.params
    notes: list[str] = []
    kind = task.task_type

    if kind is TaskType.TRANSLATE:
        d = float(p["distance"])
        heading = wrap_angle(start.yaw + float(p["angle"]))
        dx, dy = end.x - start.x, end.y - start.y
        moved = math.hypot(dx, dy)
        if abs(moved - d) > rule.frac_tol * d:
            notes.append(f"moved {moved:.2f} m vs {d:.2f} m commanded")
        off = abs(wrap_angle(math.atan2(dy, dx) - heading))
        if off > rule.angle_tol:
            notes.append(f"heading off by {math.degrees(off):.0f}°")

    elif kind is TaskType.ROTATE:
        want = float(p["angle"])
        net = wrap_angle(end.yaw - start.yaw)
        err = abs(wrap_angle(net - want))
        if err > rule.angle_tol:
            notes.append(
                f"turned {math.degrees(net):.0f}° vs {math.degrees(want):.0f}° commanded"
            )
        drift = _dist3(end, start)
        if drift >= rule.drift_limit:
            notes.append(f"drifted {drift:.2f} m while turning")

    elif kind in (TaskType.TAKEOFF, TaskType.DIVE):
        d = float(p["distance"])
        want_dz = d if kind is TaskType.TAKEOFF else -d
        dz = end.z - start.z
        if abs(dz - want_dz) > rule.frac_tol * d:
            notes.append(
                f"altitude changed {dz:+.2f} m vs {want_dz:+.2f} m commanded"
            )

    elif kind is TaskType.APPROACH:
        obj = _require_object(spec, p, "target")
        standoff = sim.DEFAULT_SIM_PARAMS.standoff_scale * obj.radius
        r_end = _dist3(end, obj)
        if not (rule.range_lo * standoff <= r_end <= rule.range_hi * standoff):
            notes.append(
                f"ended {r_end:.2f} m from the object vs standoff {standoff:.2f} m"
            )
        r_before = _dist3(pts[_window_start(traj, rule)], obj)
        if r_end >= r_before:
            notes.append("range did not decrease over the final second")

    elif kind is TaskType.ORBIT:
        obj = _require_object(spec, p, "target")
        rho = float(
            p.get("distance", sim.DEFAULT_SIM_PARAMS.orbit_radius_scale * obj.radius)
        )
        angles = [math.atan2(q.y - obj.y, q.x - obj.x) for q in pts]
        sweep = sum(wrap_angle(b - a) for a, b in zip(angles, angles[1:]))
        if abs(sweep) < rule.sweep_min:
            notes.append(
                f"sweep {abs(math.degrees(sweep)):.0f}° < "
                f"{math.degrees(rule.sweep_min):.0f}°"
            )
        radial = max(abs(math.hypot(q.x - obj.x, q.y - obj.y) - rho) for q in pts)
        if radial > rule.radial_tol * rho:
            notes.append(
                f"radius deviated {radial:.2f} m from the commanded {rho:.2f} m"
            )

    elif kind is TaskType.PASS_SIDE:
        obj = _require_object(spec, p, "target")
        ux, uy = _unit_toward(
            start.x, start.y, obj.x, obj.y, f"start sits on top of {obj.id!r}"
        )
        side_sign = 1.0 if p["side"] == "left" else -1.0
        nx, ny = -uy * side_sign, ux * side_sign
        along = [(q.x - obj.x) * ux + (q.y - obj.y) * uy for q in pts]
        lateral = [(q.x - obj.x) * nx + (q.y - obj.y) * ny for q in pts]
        l_cross = _crossing(along, lateral)
        if l_cross is None:
            notes.append("never passed the object")
        elif l_cross <= 0.0:
            notes.append(f"passed on the wrong side ({p['side']} commanded)")
        elif not (rule.clearance_lo <= l_cross <= rule.clearance_hi):
            notes.append(
                f"clearance {l_cross:.2f} m outside "
                f"[{rule.clearance_lo:.1f}, {rule.clearance_hi:.1f}] m"
            )

    elif kind is TaskType.FLY_BETWEEN:
        a = _require_object(spec, p, "target")
        b = _require_object(spec, p, "target_b")
        vx, vy = _unit_toward(a.x, a.y, b.x, b.y, "the two objects coincide")
        mx, my = (a.x + b.x) / 2.0, (a.y + b.y) / 2.0
        nx, ny = -vy, vx
        along = [(q.x - mx) * nx + (q.y - my) * ny for q in pts]
        lateral = [(q.x - mx) * vx + (q.y - my) * vy for q in pts]
        l_cross = _crossing(along, lateral)
        if l_cross is None:
            notes.append("never crossed the line between the objects")
        elif abs(l_cross) > rule.midline_tol:
            notes.append(
                f"crossed {abs(l_cross):.2f} m from the midpoint "
                f"(limit {rule.midline_tol:.1f} m)"
            )

    elif kind is TaskType.HOVER_BESIDE:
        obj = _require_object(spec, p, "target")
        offset = sim.DEFAULT_SIM_PARAMS.standoff_scale * obj.radius
        drift = max(_dist3(q, end) for q in pts[_window_start(traj, rule) :])
        if drift >= rule.hover_drift:
            notes.append(f"moved {drift:.2f} m during the final second")
        r = math.hypot(end.x - obj.x, end.y - obj.y)
        if abs(r - offset) > rule.offset_tol * offset:
            notes.append(
                f"hovering {r:.2f} m from the object vs {offset:.2f} m commanded"
            )

    elif kind is TaskType.FACE_TARGET:
        obj = _require_object(spec, p, "target")
        bearing = wrap_angle(math.atan2(obj.y - end.y, obj.x - end.x) - end.yaw)
        if abs(bearing) > rule.angle_tol:
            notes.append(f"facing {abs(math.degrees(bearing)):.0f}° off the target")

    else:  # pragma: no cover - TaskType is closed
        raise InvariantViolation("task_type", f"no success rule for {kind!r}")

    return (not notes, notes)


# --- suite evaluation ----------------------------------------------------------------


@dataclass(frozen=True)
class EvalCase:
    """One benchmark unit: a reference episode plus the scene it was flown in."""

    episode: Episode
    scenario: ScenarioSpec


@dataclass(frozen=True)
class EvalResult:
    episode_id: str
    task_type: TaskType
    success: bool
    ndtw: float
    dtw_cost: float
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not (0.0 <= self.ndtw <= 1.0):
            raise InvariantViolation("ndtw", f"{self.ndtw} outside [0, 1]")
        if self.dtw_cost < 0.0:
            raise InvariantViolation("dtw_cost", f"{self.dtw_cost} negative")


@dataclass(frozen=True)
class SuiteReport:
    """Per-episode results with per-task aggregation."""

    results: tuple[EvalResult, ...]
    d_th: float = DEFAULT_D_TH

    def rows(self) -> list[tuple[str, int, float, float]]:
        """(task, episode count, success rate, mean NDTW), sorted by task name."""
        grouped: dict[str, list[EvalResult]] = {}
        for r in self.results:
            grouped.setdefault(r.task_type.value, []).append(r)
        out = []
        for name in sorted(grouped):
            rs = grouped[name]
            sr = sum(r.success for r in rs) / len(rs)
            mean = sum(r.ndtw for r in rs) / len(rs)
            out.append((name, len(rs), sr, mean))
        return out

    def table(self) -> str:
        lines = ["task\tcount\tsr\tmean_ndtw"]
        for name, count, sr, mean in self.rows():
            lines.append(f"{name}\t{count}\t{sr:.4f}\t{mean:.4f}")
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        tasks = {
            name: {"count": count, "sr": sr, "mean_ndtw": mean}
            for name, count, sr, mean in self.rows()
        }
        n = len(self.results)
        overall = {
            "count": n,
            "sr": (sum(r.success for r in self.results) / n) if n else 0.0,
            "mean_ndtw": (sum(r.ndtw for r in self.results) / n) if n else 0.0,
        }
        return {"d_th": self.d_th, "tasks": tasks, "overall": overall}


def reference_trajectory(episode: Episode, uav_start: LocalPose) -> Trajectory:
    """World-frame reference path of an episode whose frames are start-relative."""
    points = []
    for f in episode.frames:
        d = f.pose
        points.append(
            LocalPose(
                x=uav_start.x + d.x,
                y=uav_start.y + d.y,
                z=uav_start.z + d.z,
                roll=wrap_angle(uav_start.roll + d.roll),
                pitch=wrap_angle(uav_start.pitch + d.pitch),
                yaw=wrap_angle(uav_start.yaw + d.yaw),
            )
        )
    return Trajectory(tuple(points))


PolicyLike = Policy | Callable[[ScenarioSpec], Policy]


def _case_seed(episode_id: str, seed: int) -> int:
    return zlib.crc32(episode_id.encode()) ^ seed


def evaluate_suite(
    cases: Iterable[EvalCase],
    policy: PolicyLike,
    cfg: SchemeConfig,
    lat: LatencyModel,
    *,
    rules: Mapping[TaskType, SuccessRule] = DEFAULT_RULES,
    d_th: float = DEFAULT_D_TH,
    seed: int = 0,
    timeout_s: float = 120.0,
) -> SuiteReport:
    """Fly every case through the bridge and score it against its reference.

    ``policy`` is either a single policy shared across cases (e.g. a remote
    endpoint) or a callable building one per scenario.  A failing episode is
    recorded as unsuccessful with the error in its notes; the suite always
    runs to completion.
    """
    results: list[EvalResult] = []
    for case in cases:
        episode, scenario = case.episode, case.scenario
        task = episode.instruction
        try:
            bound = policy if hasattr(policy, "decide") else policy(scenario)
            world = sim.make_world(scenario)
            outcome = run_scheme(
                cfg,
                lat,
                bound,
                world,
                task,
                timeout=timeout_s,
                instruction_id=episode.id,
                seed=_case_seed(episode.id, seed),
            )
            pred = Trajectory(tuple(outcome.trajectory))
            ref = reference_trajectory(episode, scenario.uav_start)
            cost = dtw(pred.vec6(), ref.vec6())
            score = math.exp(-cost / (len(ref) * d_th))
            ok, notes = check_success(pred, task, scenario, rules[task.task_type])
            results.append(
                EvalResult(
                    episode_id=episode.id,
                    task_type=task.task_type,
                    success=ok,
                    ndtw=score,
                    dtw_cost=cost,
                    notes=tuple(notes),
                )
            )
        except HarnessError as e:
            results.append(
                EvalResult(
                    episode_id=episode.id,
                    task_type=task.task_type,
                    success=False,
                    ndtw=0.0,
                    dtw_cost=math.inf,
                    notes=(f"error: {e}",),
                )
            )
    return SuiteReport(results=tuple(results), d_th=d_th)
