"""Latency-handling control schemes for ground-station inference.

Three ways to fly while a remote policy thinks:

- StopAndInfer: hold position whenever a query is in flight; fly each chunk
  to completion, then query again.
- Continuous: keep flying stale targets; apply an arriving chunk as body
  offsets from the state at arrival.  The anchor mismatch reproduces the
  control error this scheme suffers in the field.
- GloballyAligned: keep flying stale targets; fuse an arriving chunk with
  the state it was computed from, then drop targets whose scheduled time
  already fell inside the perception-action delay.

Everything runs on a virtual clock at the control tick, so runs are exactly
reproducible; the server wraps the same runner in real time.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field

from uavbench import sim
from uavbench.bridge.latency import LatencyModel
from uavbench.bridge.messages import (
    Ack,
    BridgeMessage,
    ChunkCmd,
    FrameMeta,
    InstructionStart,
    RemoteQuery,
    Telemetry,
)
from uavbench.bridge.policies import Policy
from uavbench.datamodel import (
    ActionChunk,
    Instruction,
    InvariantViolation,
    UavState,
)
from uavbench.errors import HarnessError, Timeout
from uavbench.geo import LocalPose, compose_pose

_EPS = 1e-9


class EmptyChunk(HarnessError):
    pass


class SchemeKind(enum.Enum):
    STOP_AND_INFER = "stop"
    CONTINUOUS = "cont"
    GLOBALLY_ALIGNED = "global"


@dataclass(frozen=True)
class SchemeConfig:
    scheme: SchemeKind = SchemeKind.GLOBALLY_ALIGNED
    chunk_period: float = 0.4
    step_dt: float = 0.2

    def __post_init__(self) -> None:
        if not (math.isfinite(self.step_dt) and self.step_dt > 0):
            raise InvariantViolation("step_dt", f"bad step_dt {self.step_dt!r}")
        if self.chunk_period < self.step_dt:
            raise InvariantViolation(
                "chunk_period",
                f"chunk_period {self.chunk_period} below step_dt {self.step_dt}",
            )


@dataclass(frozen=True)
class TargetQueue:
    """World-frame targets with scheduled arrival times, swapped atomically."""

    targets: tuple[tuple[float, LocalPose], ...] = ()
    generation: int = 0

    def __post_init__(self) -> None:
        etas = [eta for eta, _ in self.targets]
        if any(b <= a for a, b in zip(etas, etas[1:])):
            raise InvariantViolation("targets", "etas must be strictly increasing")

    def select(self, clock: float) -> tuple[float, LocalPose] | None:
        """First target still ahead of the clock, else the final target."""
        for eta, pose in self.targets:
            if eta > clock + _EPS:
                return (eta, pose)
        return self.targets[-1] if self.targets else None

    def exhausted(self, clock: float) -> bool:
        return not self.targets or self.targets[-1][0] <= clock + _EPS


def align_chunk_global(
    chunk: ActionChunk, anchor: UavState
) -> list[tuple[float, LocalPose]]:
    """Fuse body-frame targets with an anchor state into (eta, world pose)."""
    if not chunk.targets:
        raise EmptyChunk("cannot align a task-complete chunk")
    return [
        (chunk.t_inf + (k + 1) * chunk.step_dt, compose_pose(anchor.pose, target))
        for k, target in enumerate(chunk.targets)
    ]


def prune_passed(
    entries: list[tuple[float, LocalPose]], now: float, delay: float
) -> list[tuple[float, LocalPose]]:
    """Drop targets scheduled inside the delay window; keep at least the last."""
    kept = [(eta, pose) for eta, pose in entries if eta > now + delay + _EPS]
    if not kept and entries:
        kept = [entries[-1]]
    return kept


@dataclass(frozen=True)
class TranscriptEntry:
    t: float
    sender: str  # "drone" or "ground"
    message: BridgeMessage


@dataclass
class _Pending:
    request_t: float
    arrival_t: float
    chunk: ActionChunk


@dataclass
class RunResult:
    trajectory: list[LocalPose]
    transcript: list[TranscriptEntry]
    consumed: list[tuple[float, int, float]]  # (tick clock, generation, eta)
    world: sim.World


class SchemeRunner:
    """Closed-loop executor of one instruction under one scheme.

    tick() advances the world one control interval.  The policy is invoked
    synchronously at request ticks but its chunk takes effect only once the
    modelled latency has elapsed.
    """

    def __init__(
        self,
        cfg: SchemeConfig,
        lat: LatencyModel,
        policy: Policy,
        world: sim.World,
        task: Instruction,
        *,
        instruction_id: str = "task",
        params: sim.SimParams = sim.DEFAULT_SIM_PARAMS,
        seed: int = 0,
    ):
        if abs(params.step_dt - cfg.step_dt) > _EPS:
            raise InvariantViolation(
                "step_dt", "scheme and sim tick intervals must match"
            )
        self.cfg = cfg
        self.lat = lat
        self.policy = policy
        self.world = world
        self.task = task
        self.instruction_id = instruction_id
        self.params = params
        self._rng = random.Random(seed)
        self.queue = TargetQueue()
        self.pending: _Pending | None = None
        self.policy_done = False
        self.aborted = False
        self.next_request_t = world.clock
        self.trajectory: list[LocalPose] = [world.uav.pose]
        self.transcript: list[TranscriptEntry] = []
        self.consumed: list[tuple[float, int, float]] = []
        self._tick_index = 0
        self._done_acked = False
        self._log("ground", InstructionStart(id=instruction_id, text=task.text))
        self._log("drone", Ack(ref=f"accepted:{instruction_id}"))

    def _log(self, sender: str, message: BridgeMessage) -> None:
        self.transcript.append(
            TranscriptEntry(t=self.world.clock, sender=sender, message=message)
        )

    # -- inference lifecycle --

    def _issue_request(self) -> None:
        state = self.world.uav
        obs = sim.observe(self.world, self.params)
        self._log(
            "drone",
            RemoteQuery(t=state.t, state=state, obs=obs, text=self.task.text),
        )
        chunk = self.policy.decide(state, obs, self.task)
        delay = self.lat.inference_s(self._rng) + self.lat.transport_s()
        self.pending = _Pending(
            request_t=self.world.clock,
            arrival_t=self.world.clock + delay,
            chunk=chunk,
        )

    def _apply_chunk(self, pending: _Pending) -> None:
        chunk = pending.chunk
        self._log("ground", ChunkCmd(chunk=chunk))
        if not chunk.targets:
            self.policy_done = True
            return
        scheme = self.cfg.scheme
        if scheme is SchemeKind.GLOBALLY_ALIGNED:
            entries = align_chunk_global(chunk, chunk.anchor)
            delay = pending.arrival_t - pending.request_t
            entries = prune_passed(entries, chunk.t_inf, delay)
        elif scheme is SchemeKind.CONTINUOUS:
            rebased = ActionChunk(
                t_inf=self.world.clock,
                anchor=self.world.uav,
                targets=chunk.targets,
                step_dt=chunk.step_dt,
            )
            entries = align_chunk_global(rebased, rebased.anchor)
        else:  # StopAndInfer flies the chunk from the arrival tick
            rebased = ActionChunk(
                t_inf=self.world.clock,
                anchor=chunk.anchor,
                targets=chunk.targets,
                step_dt=chunk.step_dt,
            )
            entries = align_chunk_global(rebased, rebased.anchor)
        self.queue = TargetQueue(
            targets=tuple(entries), generation=self.queue.generation + 1
        )

    def _schedule_next_request(self, pending: _Pending) -> None:
        if self.cfg.scheme is SchemeKind.STOP_AND_INFER:
            # Re-query only once the applied chunk has been flown out.
            self.next_request_t = math.inf
        else:
            self.next_request_t = max(
                pending.request_t + self.cfg.chunk_period, self.world.clock
            )

    def _process_arrival(self, clock: float) -> None:
        if self.pending is not None and self.pending.arrival_t <= clock + _EPS:
            pending = self.pending
            self.pending = None
            self._apply_chunk(pending)
            self._schedule_next_request(pending)

    def _ack_done(self) -> None:
        if not self._done_acked:
            self._done_acked = True
            self._log("drone", Ack(ref=f"done:{self.instruction_id}"))

    # -- one control tick --

    def tick(self) -> None:
        clock = self.world.clock
        self._process_arrival(clock)
        may_query = not (self.policy_done or self.aborted) and self.pending is None
        if may_query and self.queue.exhausted(clock):
            # A starved plan queries immediately; chunk_period only rate-limits
            # refreshes of a plan that still has targets left to fly.
            self.next_request_t = min(self.next_request_t, clock)
        if may_query and clock + _EPS >= self.next_request_t:
            self._issue_request()
            # Sub-tick latency lands within this same interval.
            self._process_arrival(clock)
        if self.done:
            self._ack_done()
            return

        holding = self.aborted or (
            self.cfg.scheme is SchemeKind.STOP_AND_INFER and self.pending is not None
        )
        selected = None if holding else self.queue.select(clock)
        if selected is None:
            cmd = sim.HOLD
        else:
            eta, pose = selected
            self.consumed.append((clock, self.queue.generation, eta))
            cmd = sim.goto(pose)
        self.world = sim.step(self.world, cmd, self.cfg.step_dt, self.params)
        self._tick_index += 1
        state = self.world.uav
        self.trajectory.append(state.pose)
        self._log("drone", Telemetry(t=state.t, state=state))
        self._log(
            "drone",
            FrameMeta(
                t=state.t,
                obs_ref=f"live:{self.instruction_id}:{self._tick_index:04d}",
            ),
        )
        if self.done:
            self._ack_done()

    def abort(self) -> None:
        """Drop all targets and queries; the next tick holds position."""
        self.aborted = True
        self.pending = None
        self.queue = TargetQueue(generation=self.queue.generation + 1)
        self.next_request_t = math.inf
        self._log("ground", Ack(ref=f"aborted:{self.instruction_id}"))

    @property
    def done(self) -> bool:
        if self.aborted:
            return True
        return (
            self.policy_done
            and self.pending is None
            and self.queue.exhausted(self.world.clock)
        )


def run_scheme(
    cfg: SchemeConfig,
    lat: LatencyModel,
    policy: Policy,
    world: sim.World,
    task: Instruction,
    *,
    timeout: float = 120.0,
    instruction_id: str = "task",
    params: sim.SimParams = sim.DEFAULT_SIM_PARAMS,
    seed: int = 0,
) -> RunResult:
    """Fly one instruction to completion; raises Timeout past the budget."""
    runner = SchemeRunner(
        cfg,
        lat,
        policy,
        world,
        task,
        instruction_id=instruction_id,
        params=params,
        seed=seed,
    )
    while not runner.done:
        if runner.world.clock >= timeout - _EPS:
            raise Timeout(
                f"instruction {instruction_id!r} still running at {timeout} s"
            )
        runner.tick()
    return RunResult(
        trajectory=runner.trajectory,
        transcript=runner.transcript,
        consumed=runner.consumed,
        world=runner.world,
    )
