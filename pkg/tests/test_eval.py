"""Scoring: DTW/NDTW, success predicates, and the suite runner."""

import math
import random
from dataclasses import replace

import pytest

from uavbench import eval as ev
from uavbench import sim
from uavbench.bridge.latency import LatencyModel
from uavbench.bridge.policies import LocalOracle
from uavbench.bridge.schemes import SchemeConfig
from uavbench.datamodel import InvariantViolation, TaskType, make_instruction
from uavbench.geo import LocalPose, Vec6, pose_delta
from uavbench.sim import ObjectClass, ScenarioSpec, SceneObject, UnresolvedTarget


def rand_vec6(rng: random.Random) -> Vec6:
    return Vec6(
        rng.uniform(-5, 5),
        rng.uniform(-5, 5),
        rng.uniform(-5, 5),
        rng.uniform(-1, 1),
        rng.uniform(-1, 1),
        rng.uniform(-1, 1),
    )


def brute_dtw(a, b):
    """Exhaustive minimum over all monotone boundary-matched alignments."""
    n, m = len(a), len(b)
    best = math.inf

    def walk(i, j, acc):
        nonlocal best
        if i == n - 1 and j == m - 1:
            best = min(best, acc)
            return
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            ni, nj = i + di, j + dj
            if ni < n and nj < m:
                walk(ni, nj, acc + math.dist(a[ni], b[nj]))

    walk(0, 0, math.dist(a[0], b[0]))
    return best


def line_traj(n=10, step=0.36, z=2.0):
    return ev.Trajectory(tuple(LocalPose(k * step, 0.0, z, 0, 0, 0.0) for k in range(n)))


# --- dtw --------------------------------------------------------------------------


def test_dtw_matches_brute_force_on_short_sequences():
    rng = random.Random(11)
    for _ in range(80):
        a = [rand_vec6(rng) for _ in range(rng.randint(1, 6))]
        b = [rand_vec6(rng) for _ in range(rng.randint(1, 6))]
        assert abs(ev.dtw(a, b) - brute_dtw(a, b)) <= 1e-9


def test_dtw_identical_is_zero():
    rng = random.Random(2)
    seq = [rand_vec6(rng) for _ in range(30)]
    assert ev.dtw(seq, seq) == 0.0


def test_dtw_single_pair_is_pointwise_distance():
    a = [Vec6(3.0, 0, 0, 1, 1, 1)]
    b = [Vec6(0.0, 0, 0, 1, 1, 1)]
    assert ev.dtw(a, b) == pytest.approx(3.0, abs=1e-12)


def test_dtw_is_symmetric_and_nonnegative():
    rng = random.Random(9)
    for _ in range(30):
        a = [rand_vec6(rng) for _ in range(rng.randint(1, 8))]
        b = [rand_vec6(rng) for _ in range(rng.randint(1, 8))]
        cost = ev.dtw(a, b)
        assert cost >= 0.0
        assert cost == pytest.approx(ev.dtw(b, a), abs=1e-9)


def test_dtw_appending_a_point_costs_its_distance_to_the_tail():
    # The final cell of the alignment always pays dist(tail, new point), and
    # the diagonal extension of the optimal path achieves exactly that.
    rng = random.Random(4)
    for _ in range(40):
        a = [rand_vec6(rng) for _ in range(rng.randint(1, 6))]
        p = rand_vec6(rng)
        assert ev.dtw(a, a + [p]) == pytest.approx(math.dist(a[-1], p), abs=1e-9)


def test_dtw_rejects_empty_input():
    with pytest.raises(ev.EmptyTrajectory):
        ev.dtw([], [Vec6(0, 0, 0, 1, 1, 1)])
    with pytest.raises(ev.EmptyTrajectory):
        ev.dtw([Vec6(0, 0, 0, 1, 1, 1)], [])


# --- ndtw -------------------------------------------------------------------------


def test_ndtw_identity():
    traj = line_traj(25)
    assert ev.ndtw(traj, traj) == pytest.approx(1.0, abs=1e-12)


def test_ndtw_cost_equal_to_budget_gives_inverse_e():
    ref = ev.Trajectory((LocalPose(0, 0, 0, 0, 0, 0),))
    pred = ev.Trajectory((LocalPose(3.0, 0, 0, 0, 0, 0),))
    # dtw cost 3.0 == |ref| * d_th == 1 * 3.0
    assert ev.ndtw(pred, ref) == pytest.approx(math.exp(-1.0), abs=1e-9)


def test_ndtw_shuffled_scores_below_ordered():
    ref = line_traj(12)
    points = list(ref.points)
    rng = random.Random(6)
    rng.shuffle(points)
    assert points != list(ref.points)
    shuffled = ev.Trajectory(tuple(points))
    assert ev.ndtw(shuffled, ref) < ev.ndtw(ref, ref)


def test_ndtw_decreases_with_cost():
    ref = line_traj(10)
    near = ev.Trajectory(tuple(replace(p, y=0.1) for p in ref.points))
    far = ev.Trajectory(tuple(replace(p, y=2.5) for p in ref.points))
    assert 0.0 < ev.ndtw(far, ref) < ev.ndtw(near, ref) < 1.0


def test_ndtw_rejects_bad_threshold():
    traj = line_traj(3)
    with pytest.raises(InvariantViolation):
        ev.ndtw(traj, traj, d_th=0.0)


def test_trajectory_must_have_points():
    with pytest.raises(ev.EmptyTrajectory):
        ev.Trajectory(())


def test_vec6_embedding_of_zero_pose():
    traj = ev.Trajectory((LocalPose(0, 0, 0, 0, 0, 0),))
    assert traj.vec6() == [Vec6(0, 0, 0, 1, 1, 1)]


# --- success predicates --------------------------------------------------------------


def bare_scene(*objects, yaw=0.0):
    return ScenarioSpec(
        objects=tuple(objects), uav_start=LocalPose(0, 0, 2.0, 0, 0, yaw), seed=0
    )


CAR = SceneObject(id="car", cls=ObjectClass.CAR, x=6.0, y=0.0, z=0.8, radius=1.2)


def test_success_rule_rejects_nonpositive_parameters():
    with pytest.raises(InvariantViolation):
        ev.SuccessRule(task_type=TaskType.ROTATE, angle_tol=0.0)
    with pytest.raises(InvariantViolation):
        ev.SuccessRule(task_type=TaskType.ORBIT, radial_tol=-0.1)


def test_rule_task_mismatch_is_rejected():
    traj = line_traj(3)
    task = make_instruction(TaskType.ROTATE, {"angle": 1.0})
    with pytest.raises(InvariantViolation):
        ev.check_success(traj, task, bare_scene(), ev.DEFAULT_RULES[TaskType.ORBIT])


def test_every_oracle_schedule_satisfies_its_task():
    for task_type in TaskType:
        for seed in range(3):
            task, spec = sim.scenario_for_task(task_type, seed)
            schedule = sim.build_schedule(task, spec)
            ok, notes = ev.check_success(ev.Trajectory(tuple(schedule)), task, spec)
            assert ok, (task_type, seed, notes)


def test_rotate_within_tolerance_passes():
    task = make_instruction(TaskType.ROTATE, {"angle": math.radians(90)})
    traj = ev.Trajectory(
        (LocalPose(0, 0, 2, 0, 0, 0.0), LocalPose(0, 0, 2, 0, 0, math.radians(80)))
    )
    ok, notes = ev.check_success(traj, task, bare_scene())
    assert ok, notes


def test_rotate_beyond_tolerance_fails():
    task = make_instruction(TaskType.ROTATE, {"angle": math.radians(90)})
    traj = ev.Trajectory(
        (LocalPose(0, 0, 2, 0, 0, 0.0), LocalPose(0, 0, 2, 0, 0, math.radians(70)))
    )
    ok, notes = ev.check_success(traj, task, bare_scene())
    assert not ok and "turned" in notes[0]


def test_rotate_with_drift_fails():
    task = make_instruction(TaskType.ROTATE, {"angle": math.radians(90)})
    traj = ev.Trajectory(
        (LocalPose(0, 0, 2, 0, 0, 0.0), LocalPose(1.5, 0, 2, 0, 0, math.radians(90)))
    )
    ok, notes = ev.check_success(traj, task, bare_scene())
    assert not ok and "drifted" in notes[0]


def test_straight_line_under_orbit_reports_zero_sweep():
    task = make_instruction(TaskType.ORBIT, {"target": "car"})
    spec = bare_scene(replace(CAR, x=5.0))
    # Flying straight away from the object sweeps no angle around it.
    points = tuple(LocalPose(3.0 - 0.36 * k, 0.0, 2.0, 0, 0, math.pi) for k in range(12))
    start = replace(spec, uav_start=points[0])
    ok, notes = ev.check_success(ev.Trajectory(points), task, start)
    assert not ok
    assert "sweep 0° < 300°" in notes


def test_translate_distance_and_heading_bounds():
    task = make_instruction(
        TaskType.TRANSLATE, {"distance": 5.0, "angle": 0.0}
    )
    good = ev.Trajectory((LocalPose(0, 0, 2, 0, 0, 0), LocalPose(4.2, 0, 2, 0, 0, 0)))
    ok, _ = ev.check_success(good, task, bare_scene())
    assert ok  # 4.2 m is within 20% of 5 m
    short = ev.Trajectory((LocalPose(0, 0, 2, 0, 0, 0), LocalPose(3.5, 0, 2, 0, 0, 0)))
    ok, notes = ev.check_success(short, task, bare_scene())
    assert not ok and "moved" in notes[0]
    skew = ev.Trajectory((LocalPose(0, 0, 2, 0, 0, 0), LocalPose(4.0, 2.0, 2, 0, 0, 0)))
    ok, notes = ev.check_success(skew, task, bare_scene())
    assert not ok and "heading" in notes[0]


def test_takeoff_altitude_tolerance():
    task = make_instruction(TaskType.TAKEOFF, {"distance": 4.0})
    rise = lambda dz: ev.Trajectory(
        (LocalPose(0, 0, 1, 0, 0, 0), LocalPose(0, 0, 1 + dz, 0, 0, 0))
    )
    assert ev.check_success(rise(3.3), task, bare_scene())[0]  # within 20%
    ok, notes = ev.check_success(rise(2.9), task, bare_scene())
    assert not ok and "altitude" in notes[0]


def test_dive_checks_signed_altitude_change():
    task = make_instruction(TaskType.DIVE, {"distance": 3.0})
    dive = ev.Trajectory((LocalPose(0, 0, 5, 0, 0, 0), LocalPose(3, 0, 2.1, 0, 0, 0)))
    assert ev.check_success(dive, task, bare_scene())[0]
    climb = ev.Trajectory((LocalPose(0, 0, 5, 0, 0, 0), LocalPose(3, 0, 8, 0, 0, 0)))
    ok, notes = ev.check_success(climb, task, bare_scene())
    assert not ok


def test_approach_requires_closing_range():
    task = make_instruction(TaskType.APPROACH, {"target": "car"})
    spec = bare_scene(CAR)
    inbound = tuple(LocalPose(0.36 * k, 0, 2, 0, 0, 0) for k in range(11))
    assert ev.check_success(ev.Trajectory(inbound), task, spec)[0]
    ok, notes = ev.check_success(ev.Trajectory(inbound[::-1]), task, spec)
    assert not ok


def test_pass_side_wrong_side_fails():
    spec = bare_scene(CAR)
    points = tuple(
        LocalPose(0.5 * k, -1.8, 2, 0, 0, 0) for k in range(20)  # passes on the right
    )
    task = make_instruction(TaskType.PASS_SIDE, {"target": "car", "side": "left"})
    ok, notes = ev.check_success(ev.Trajectory(points), task, spec)
    assert not ok and "wrong side" in notes[0]
    task = make_instruction(TaskType.PASS_SIDE, {"target": "car", "side": "right"})
    assert ev.check_success(ev.Trajectory(points), task, spec)[0]


def test_pass_side_clearance_band():
    spec = bare_scene(CAR)
    graze = tuple(LocalPose(0.5 * k, 0.3, 2, 0, 0, 0) for k in range(20))
    task = make_instruction(TaskType.PASS_SIDE, {"target": "car", "side": "left"})
    ok, notes = ev.check_success(ev.Trajectory(graze), task, spec)
    assert not ok and "clearance" in notes[0]
    wide = tuple(LocalPose(0.5 * k, 5.0, 2, 0, 0, 0) for k in range(30))
    ok, notes = ev.check_success(ev.Trajectory(wide), task, spec)
    assert not ok and "clearance" in notes[0]


def test_pass_side_never_crossing_fails():
    spec = bare_scene(CAR)
    task = make_instruction(TaskType.PASS_SIDE, {"target": "car", "side": "left"})
    hover = ev.Trajectory(tuple(LocalPose(0, 1.8, 2, 0, 0, 0) for _ in range(6)))
    ok, notes = ev.check_success(hover, task, spec)
    assert not ok and notes == ["never passed the object"]


def test_fly_between_midline_tolerance():
    a = SceneObject(id="gate-a", cls=ObjectClass.GATE, x=6, y=2, z=2, radius=1.5)
    b = SceneObject(id="gate-b", cls=ObjectClass.GATE, x=6, y=-2, z=2, radius=1.5)
    spec = bare_scene(a, b)
    task = make_instruction(
        TaskType.FLY_BETWEEN, {"target": "gate-a", "target_b": "gate-b"}
    )
    centered = tuple(LocalPose(0.5 * k, 0.0, 2, 0, 0, 0) for k in range(16))
    assert ev.check_success(ev.Trajectory(centered), task, spec)[0]
    skimming = tuple(LocalPose(0.5 * k, 1.6, 2, 0, 0, 0) for k in range(16))
    ok, notes = ev.check_success(ev.Trajectory(skimming), task, spec)
    assert not ok and "midpoint" in notes[0]


def test_hover_beside_requires_stillness():
    spec = bare_scene(CAR)
    task = make_instruction(TaskType.HOVER_BESIDE, {"target": "car", "side": "left"})
    offset = 1.5 * CAR.radius
    still = ev.Trajectory(tuple(LocalPose(6.0, offset, 2, 0, 0, 0) for _ in range(8)))
    assert ev.check_success(still, task, spec)[0]
    moving = ev.Trajectory(
        tuple(LocalPose(6.0 + 0.2 * k, offset, 2, 0, 0, 0) for k in range(8))
    )
    ok, notes = ev.check_success(moving, task, spec)
    assert not ok and "final second" in notes[0]


def test_face_target_bearing_limit():
    spec = bare_scene(CAR)
    task = make_instruction(TaskType.FACE_TARGET, {"target": "car"})
    aimed = ev.Trajectory((LocalPose(0, 0, 2, 0, 0, math.radians(8)),))
    assert ev.check_success(aimed, task, spec)[0]
    askew = ev.Trajectory((LocalPose(0, 0, 2, 0, 0, math.radians(12)),))
    ok, notes = ev.check_success(askew, task, spec)
    assert not ok and "off the target" in notes[0]


def test_unknown_target_raises():
    task = make_instruction(TaskType.APPROACH, {"target": "ghost"})
    with pytest.raises(UnresolvedTarget):
        ev.check_success(line_traj(4), task, bare_scene(CAR))


# --- reference lifting ---------------------------------------------------------------


def test_reference_lift_inverts_start_relative_deltas():
    rng = random.Random(13)
    for _ in range(50):
        start = LocalPose(
            rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(0, 10),
            0.0, 0.0, rng.uniform(-math.pi, math.pi),
        )
        pose = LocalPose(
            rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(0, 10),
            rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-math.pi, math.pi),
        )
        task, spec = sim.scenario_for_task(TaskType.TRANSLATE, 0)
        spec = replace(spec, uav_start=start)
        episode = sim.generate_episode(task, spec, episode_id="lift-test")
        first = episode.frames[0]
        fake = replace(episode, frames=(replace(first, pose=pose_delta(start, pose)),))
        lifted = ev.reference_trajectory(fake, start).points[0]
        assert lifted.x == pytest.approx(pose.x, abs=1e-9)
        assert lifted.y == pytest.approx(pose.y, abs=1e-9)
        assert lifted.z == pytest.approx(pose.z, abs=1e-9)
        assert math.cos(lifted.yaw) == pytest.approx(math.cos(pose.yaw), abs=1e-9)
        assert math.sin(lifted.yaw) == pytest.approx(math.sin(pose.yaw), abs=1e-9)


# --- suite evaluation ---------------------------------------------------------------


def oracle_cases(seeds=range(2)):
    cases = []
    for task_type in TaskType:
        for seed in seeds:
            task, spec = sim.scenario_for_task(task_type, seed)
            eid = f"{task_type.value}-s{seed}"
            episode = sim.generate_episode(task, spec, episode_id=eid)
            cases.append(ev.EvalCase(episode=episode, scenario=spec))
    return cases


def test_suite_oracle_zero_latency_is_perfect():
    report = ev.evaluate_suite(
        oracle_cases(),
        lambda spec: LocalOracle(spec),
        SchemeConfig(),
        LatencyModel(),
    )
    assert len(report.results) == 20
    for name, count, sr, mean in report.rows():
        assert count == 2
        assert sr == 1.0, name
        assert mean >= 0.9, name
    failures = [r for r in report.results if not r.success]
    assert failures == []


def test_suite_records_broken_episode_and_continues():
    cases = oracle_cases(seeds=[0])
    approach = next(c for c in cases if c.episode.instruction.task_type is TaskType.APPROACH)
    # Drop the target from the scene so the oracle cannot resolve it.
    broken_scene = replace(approach.scenario, objects=())
    cases[cases.index(approach)] = ev.EvalCase(
        episode=approach.episode, scenario=broken_scene
    )
    report = ev.evaluate_suite(
        cases, lambda spec: LocalOracle(spec), SchemeConfig(), LatencyModel()
    )
    assert len(report.results) == 10
    broken = next(r for r in report.results if r.task_type is TaskType.APPROACH)
    assert not broken.success
    assert broken.ndtw == 0.0
    assert broken.notes and broken.notes[0].startswith("error:")
    others = [r for r in report.results if r.task_type is not TaskType.APPROACH]
    assert all(r.success for r in others)


def test_suite_table_shape():
    report = ev.evaluate_suite(
        oracle_cases(seeds=[1]),
        lambda spec: LocalOracle(spec),
        SchemeConfig(),
        LatencyModel(),
    )
    lines = report.table().splitlines()
    assert lines[0] == "task\tcount\tsr\tmean_ndtw"
    assert len(lines) == 1 + len(TaskType)
    for line in lines[1:]:
        name, count, sr, mean = line.split("\t")
        assert int(count) == 1
        assert 0.0 <= float(sr) <= 1.0
        assert 0.0 <= float(mean) <= 1.0
    summary = report.summary()
    assert set(summary) == {"d_th", "tasks", "overall"}
    assert summary["overall"]["sr"] == 1.0


def test_suite_is_deterministic():
    a = ev.evaluate_suite(
        oracle_cases(seeds=[2]), lambda s: LocalOracle(s), SchemeConfig(), LatencyModel()
    )
    b = ev.evaluate_suite(
        oracle_cases(seeds=[2]), lambda s: LocalOracle(s), SchemeConfig(), LatencyModel()
    )
    assert a == b


def test_eval_result_validates_score_range():
    with pytest.raises(InvariantViolation):
        ev.EvalResult(
            episode_id="x", task_type=TaskType.ROTATE, success=True,
            ndtw=1.5, dtw_cost=0.0,
        )
