"""Policy interface plus the local and remote implementations.

A policy maps (state, observation, instruction) to an ActionChunk of
body-frame targets.  LocalOracle calls the simulator's rule-based oracle in
process.  RemotePolicy forwards the query over the bridge wire format to an
external endpoint and awaits a ChunkCmd.  OraclePolicyServer is the matching
demo endpoint: it rebuilds a scene from the observation stream and runs the
same rule-based oracle, so a remote round trip reproduces local behavior.
"""

from __future__ import annotations

import math
import socket
from dataclasses import dataclass
from typing import Protocol

from uavbench.bridge.messages import (
    BridgeError,
    ChunkCmd,
    FrameDecoder,
    RemoteQuery,
    encode_message,
)
from uavbench.datamodel import (
    ActionChunk,
    Instruction,
    InstructionForm,
    TaskType,
    UavState,
    canonical_text,
    make_instruction,
)
from uavbench.errors import HarnessError
from uavbench.ingest import parse_command
from uavbench.sim import (
    CLASS_GEOMETRY,
    DEFAULT_SIM_PARAMS,
    Observation,
    ScenarioSpec,
    SceneObject,
    SimParams,
    World,
    oracle_policy,
)

REMOTE_DEADLINE_S = 2.0


class PolicyError(HarnessError):
    pass


class RemoteTimeout(PolicyError):
    pass


class MalformedChunk(PolicyError):
    pass


class Policy(Protocol):
    def decide(
        self, state: UavState, obs: Observation, instruction: Instruction
    ) -> ActionChunk: ...


@dataclass
class LocalOracle:
    """In-process rule-based policy with ground-truth scene access."""

    spec: ScenarioSpec
    params: SimParams = DEFAULT_SIM_PARAMS

    def decide(
        self, state: UavState, obs: Observation, instruction: Instruction
    ) -> ActionChunk:
        w = World(spec=self.spec, uav=state, clock=state.t)
        return oracle_policy(instruction, w, params=self.params)


class RemotePolicy:
    """Forwards queries to a bridge endpoint; one connection per instance."""

    def __init__(self, address: tuple[str, int], deadline: float = REMOTE_DEADLINE_S):
        self.address = address
        self.deadline = deadline
        self._sock: socket.socket | None = None
        self._decoder = FrameDecoder()

    def close(self) -> None:
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def _connect(self) -> socket.socket:
        if self._sock is None:
            try:
                self._sock = socket.create_connection(
                    self.address, timeout=self.deadline
                )
            except OSError as e:
                raise RemoteTimeout(f"cannot reach policy at {self.address}: {e}")
            self._decoder = FrameDecoder()
        return self._sock

    def decide(
        self, state: UavState, obs: Observation, instruction: Instruction
    ) -> ActionChunk:
        sock = self._connect()
        query = RemoteQuery(t=state.t, state=state, obs=obs, text=instruction.text)
        try:
            sock.sendall(encode_message(query))
            while True:
                data = sock.recv(65536)
                if not data:
                    raise RemoteTimeout("policy endpoint closed the connection")
                for msg in self._feed(data):
                    if isinstance(msg, ChunkCmd):
                        return msg.chunk
        except socket.timeout:
            self.close()
            raise RemoteTimeout(
                f"no ChunkCmd within {self.deadline} s from {self.address}"
            )
        except OSError as e:
            self.close()
            raise RemoteTimeout(f"transport failure: {e}")

    def _feed(self, data: bytes):
        try:
            return self._decoder.feed(data)
        except (BridgeError, HarnessError) as e:
            self.close()
            raise MalformedChunk(f"bad response frame: {e}")


def object_from_sighting(pose, sighting) -> SceneObject:
    """Invert the observation geometry back to a world-frame scene object."""
    direction = pose.yaw + sighting.bearing
    horizontal = sighting.range * math.cos(sighting.elevation)
    dz = sighting.range * math.sin(sighting.elevation)
    radius, _ = CLASS_GEOMETRY[sighting.cls]
    return SceneObject(
        id=sighting.id,
        cls=sighting.cls,
        x=pose.x + horizontal * math.cos(direction),
        y=pose.y + horizontal * math.sin(direction),
        z=pose.z + dz,
        radius=radius,
    )


_TARGET_TASKS = {
    TaskType.APPROACH,
    TaskType.ORBIT,
    TaskType.PASS_SIDE,
    TaskType.HOVER_BESIDE,
    TaskType.FACE_TARGET,
}


def bind_instruction(text: str, obs: Observation) -> Instruction | None:
    """Ground a command string against what the vehicle currently sees.

    Object references resolve to the nearest visible sighting(s).  Returns
    None when the text does not parse or required objects are not in view.
    """
    parsed = parse_command(text)
    if parsed is None:
        return None
    task_type, params = parsed
    params = dict(params)
    ranked = obs.visible  # already nearest-first
    if task_type in _TARGET_TASKS:
        if not ranked:
            return None
        params["target"] = ranked[0].id
    elif task_type is TaskType.FLY_BETWEEN:
        if len(ranked) < 2:
            return None
        params["target"] = ranked[0].id
        params["target_b"] = ranked[1].id
    form = (
        InstructionForm.FIXED
        if canonical_text(task_type, params) == text
        else InstructionForm.OPEN_VOCAB
    )
    return make_instruction(task_type, params, form, text=text)


@dataclass
class _Session:
    t0: float
    spec: ScenarioSpec
    instruction: Instruction


class OraclePolicyServer:
    """Demo bridge endpoint: the rule-based oracle behind the wire format.

    Scene knowledge comes only from the query observations: on the first
    query for an instruction text, visible sightings are inverted to world
    objects and the query pose becomes the schedule anchor.  An instruction
    it cannot parse gets an empty chunk (task-complete no-op).
    """

    def __init__(self, params: SimParams = DEFAULT_SIM_PARAMS):
        self.params = params
        self._sessions: dict[str, _Session] = {}

    def handle_query(self, query: RemoteQuery) -> ActionChunk:
        session = self._sessions.get(query.text)
        if session is None:
            instruction = bind_instruction(query.text, query.obs)
            if instruction is None:
                return ActionChunk(
                    t_inf=query.t, anchor=query.state, targets=()
                )
            objects = tuple(
                object_from_sighting(query.obs.pose, s) for s in query.obs.visible
            )
            spec = ScenarioSpec(
                objects=objects, uav_start=query.state.pose, seed=0
            )
            session = _Session(t0=query.t, spec=spec, instruction=instruction)
            self._sessions[query.text] = session
        w = World(
            spec=session.spec,
            uav=UavState(
                t=query.t - session.t0,
                pose=query.state.pose,
                velocity=query.state.velocity,
            ),
            clock=query.t - session.t0,
        )
        chunk = oracle_policy(session.instruction, w, params=self.params)
        # Re-stamp into the caller's clock and state.
        return ActionChunk(
            t_inf=query.t,
            anchor=query.state,
            targets=chunk.targets,
            step_dt=chunk.step_dt,
        )

    def serve_connection(self, conn: socket.socket) -> None:
        """Answer queries on one connection until the peer hangs up."""
        decoder = FrameDecoder()
        while True:
            data = conn.recv(65536)
            if not data:
                return
            for msg in decoder.feed(data):
                if isinstance(msg, RemoteQuery):
                    chunk = self.handle_query(msg)
                    conn.sendall(encode_message(ChunkCmd(chunk=chunk)))

    def serve_forever(self, listener: socket.socket) -> None:
        """Accept one client at a time; returns when the listener closes."""
        while True:
            try:
                conn, _ = listener.accept()
            except OSError:
                return
            with conn:
                try:
                    self.serve_connection(conn)
                except (BridgeError, OSError):
                    continue
