"""Shared factories for randomized test records.

Float fields are quantized to the precision the episode file format keeps
(6 decimals for frames and params, 9 for the origin) so that serialization
round-trips can be compared for exact equality.
"""

from __future__ import annotations

import math
import random

from uavbench.bridge import messages as msg
from uavbench.datamodel import (
    ActionChunk,
    Episode,
    EpisodeSource,
    Frame,
    Instruction,
    InstructionForm,
    PARAM_SCHEMA,
    TaskType,
    UavState,
    canonical_text,
)
from uavbench.geo import GeoPose, LocalPose
from uavbench.sim import ObjectClass, Observation, Sighting

# Stay strictly inside (-pi, pi) so quantization never crosses the wrap point.
_ANGLE_LIMIT = 3.141592


def q6(x: float) -> float:
    return round(x, 6)


def random_angle(rng: random.Random) -> float:
    return q6(rng.uniform(-_ANGLE_LIMIT, _ANGLE_LIMIT))


def random_params(rng: random.Random, task_type: TaskType) -> dict:
    required, optional = PARAM_SCHEMA[task_type]
    params: dict = {}
    for key in sorted(required | optional):
        if key == "distance":
            params[key] = q6(rng.uniform(1.0, 12.0))
        elif key == "angle":
            params[key] = random_angle(rng)
        elif key == "side":
            params[key] = rng.choice(("left", "right"))
        else:
            params[key] = rng.choice(("car", "tree", "person", "marker"))
    if task_type is TaskType.FLY_BETWEEN:
        params["target"], params["target_b"] = "obj-a", "obj-b"
    return params


def random_instruction(rng: random.Random) -> Instruction:
    task_type = rng.choice(list(TaskType))
    params = random_params(rng, task_type)
    if rng.random() < 0.5:
        return Instruction(
            text=canonical_text(task_type, params),
            task_type=task_type,
            form=InstructionForm.FIXED,
            params=params,
        )
    return Instruction(
        text=f"please {task_type.value.replace('_', ' ')} now",
        task_type=task_type,
        form=InstructionForm.OPEN_VOCAB,
        params=params,
    )


def random_local_pose(rng: random.Random, near: LocalPose | None = None) -> LocalPose:
    if near is None:
        return LocalPose(
            q6(rng.uniform(-40, 40)),
            q6(rng.uniform(-40, 40)),
            q6(rng.uniform(0, 20)),
            random_angle(rng),
            random_angle(rng),
            random_angle(rng),
        )
    return LocalPose(
        q6(near.x + rng.uniform(-0.3, 0.3)),
        q6(near.y + rng.uniform(-0.3, 0.3)),
        q6(near.z + rng.uniform(-0.3, 0.3)),
        random_angle(rng),
        random_angle(rng),
        random_angle(rng),
    )


def random_origin(rng: random.Random) -> GeoPose:
    return GeoPose(
        lat=round(rng.uniform(-60, 60), 9),
        lon=round(rng.uniform(-179, 179), 9),
        alt=round(rng.uniform(-10, 500), 9),
        roll=round(rng.uniform(-3.14159265, 3.14159265), 9),
        pitch=round(rng.uniform(-1.5, 1.5), 9),
        yaw=round(rng.uniform(-3.14159265, 3.14159265), 9),
    )


def random_episode(rng: random.Random, n_frames: int | None = None) -> Episode:
    if n_frames is None:
        n_frames = rng.randint(2, 40)
    frames = [Frame(t=0.0, pose=LocalPose(0, 0, 0, 0, 0, 0), obs_ref="obs:0")]
    pose = frames[0].pose
    for k in range(1, n_frames):
        pose = random_local_pose(rng, near=pose)
        frames.append(Frame(t=q6(k * 0.2), pose=pose, obs_ref=f"obs:{k}"))
    source = rng.choice(list(EpisodeSource))
    origin = random_origin(rng) if source is EpisodeSource.REAL_LOG else None
    return Episode(
        id=f"ep-{rng.randrange(10**6):06d}",
        instruction=random_instruction(rng),
        origin=origin,
        frames=tuple(frames),
        source=source,
    )


def some_state(t=0.0, x=0.0, y=0.0, z=2.0, yaw=0.0) -> UavState:
    return UavState(t=t, pose=LocalPose(x, y, z, 0.0, 0.0, yaw), velocity=(0, 0, 0))


def some_chunk(n=3, t_inf=1.0) -> ActionChunk:
    targets = tuple(LocalPose(0.3 * (k + 1), 0.1, 0, 0, 0, 0.05) for k in range(n))
    return ActionChunk(t_inf=t_inf, anchor=some_state(t=t_inf), targets=targets)


def random_message(rng: random.Random) -> msg.BridgeMessage:
    roll = rng.randrange(7)
    if roll == 0:
        return msg.Telemetry(t=rng.uniform(0, 100), state=some_state(t=rng.random()))
    if roll == 1:
        return msg.FrameMeta(t=rng.uniform(0, 100), obs_ref=f"sim:x:{rng.randrange(99)}")
    if roll == 2:
        return msg.InstructionStart(id=f"ep-{rng.randrange(99)}", text="fly around the object")
    if roll == 3:
        n = rng.randrange(0, 12)
        targets = tuple(
            LocalPose(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-1, 1),
                      0.0, 0.0, rng.uniform(-3, 3))
            for _ in range(n)
        )
        return msg.ChunkCmd(
            chunk=ActionChunk(t_inf=rng.uniform(0, 50), anchor=some_state(), targets=targets)
        )
    if roll == 4:
        return msg.Abort(id=f"ep-{rng.randrange(99)}")
    if roll == 5:
        return msg.Ack(ref=f"accepted:ep-{rng.randrange(99)}")
    visible = tuple(
        Sighting(id=f"obj{k}", cls=ObjectClass.CAR, bearing=rng.uniform(-0.6, 0.6),
                 elevation=rng.uniform(-0.4, 0.4), range=rng.uniform(1, 50))
        for k in range(rng.randrange(0, 4))
    )
    return msg.RemoteQuery(
        t=rng.uniform(0, 100),
        state=some_state(t=rng.random()),
        obs=Observation(pose=LocalPose(1, 2, 3, 0, 0, 0.5), visible=visible),
        text="move 5 meters forward",
    )
