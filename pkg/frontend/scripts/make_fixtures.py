#!/usr/bin/env python3
"""Regenerate the cross-language codec fixtures.

Encodes one message of every kind (plus edge cases: unicode text, empty
strings, the empty-chunk sentinel, extreme doubles) with the ground-station
codec and dumps frame hex next to a JSON rendering in the console's field
naming.  The vitest suite decodes the hex and must reproduce the JSON, then
re-encode to the identical bytes — pinning byte-level interop without
needing Python at test time.

Usage: python3 scripts/make_fixtures.py   (from frontend/, package installed)
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from uavbench.bridge.messages import (
    Abort,
    Ack,
    BridgeMessage,
    ChunkCmd,
    FrameMeta,
    InstructionStart,
    RemoteQuery,
    Telemetry,
    encode_message,
)
from uavbench.datamodel import ActionChunk, UavState
from uavbench.geo import LocalPose
from uavbench.sim import Observation, ObjectClass, Sighting

OUT = Path(__file__).resolve().parent.parent / "test" / "fixtures" / "frames.json"


def pose_json(p: LocalPose) -> dict:
    return {"x": p.x, "y": p.y, "z": p.z, "roll": p.roll, "pitch": p.pitch, "yaw": p.yaw}


def state_json(s: UavState) -> dict:
    return {"t": s.t, "pose": pose_json(s.pose), "velocity": list(s.velocity)}


def message_json(m: BridgeMessage) -> dict:
    if isinstance(m, Telemetry):
        return {"kind": 1, "t": m.t, "state": state_json(m.state)}
    if isinstance(m, FrameMeta):
        return {"kind": 2, "t": m.t, "obsRef": m.obs_ref}
    if isinstance(m, InstructionStart):
        return {"kind": 3, "id": m.id, "text": m.text}
    if isinstance(m, ChunkCmd):
        c = m.chunk
        return {
            "kind": 4,
            "chunk": {
                "tInf": c.t_inf,
                "anchor": state_json(c.anchor),
                "targets": [pose_json(t) for t in c.targets],
                "stepDt": c.step_dt,
            },
        }
    if isinstance(m, Abort):
        return {"kind": 5, "id": m.id}
    if isinstance(m, Ack):
        return {"kind": 6, "ref": m.ref}
    assert isinstance(m, RemoteQuery)
    return {
        "kind": 7,
        "t": m.t,
        "state": state_json(m.state),
        "obs": {
            "pose": pose_json(m.obs.pose),
            "visible": [
                {
                    "id": s.id,
                    "cls": s.cls.value,
                    "bearing": s.bearing,
                    "elevation": s.elevation,
                    "range": s.range,
                }
                for s in m.obs.visible
            ],
        },
        "text": m.text,
    }


def main() -> None:
    origin = LocalPose(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    moving = UavState(
        t=12.6,
        pose=LocalPose(x=-3.25, y=17.5, z=2.4, roll=0.01, pitch=-0.02, yaw=2.356194490192345),
        velocity=(1.25, -0.5, 0.125),
    )
    anchor = UavState(
        t=4.2,
        pose=LocalPose(x=10.0, y=-4.0, z=1.5, roll=0.0, pitch=0.0, yaw=math.pi / 3),
        velocity=(0.0, 2.0, 0.0),
    )
    step = LocalPose(x=0.4, y=-0.1, z=0.05, roll=0.0, pitch=0.0, yaw=-0.0872664625997)
    fixtures: list[tuple[str, BridgeMessage]] = [
        ("telemetry-origin", Telemetry(t=0.0, state=UavState(t=0.0, pose=origin))),
        ("telemetry-moving", Telemetry(t=12.6, state=moving)),
        (
            "telemetry-extreme-doubles",
            Telemetry(
                t=1e300,
                state=UavState(
                    t=1e-300,
                    pose=LocalPose(x=-1e300, y=1e-300, z=0.1, roll=math.pi, pitch=-1.5, yaw=0.0),
                    velocity=(-0.0, 2.0 ** -1022, 1.7976931348623157e308),
                ),
            ),
        ),
        ("frame-meta", FrameMeta(t=3.4, obs_ref="sim:orbit-0007:0017")),
        ("frame-meta-empty-ref", FrameMeta(t=0.2, obs_ref="")),
        ("instruction-ascii", InstructionStart(id="op-1", text="fly around the car")),
        (
            "instruction-unicode",
            InstructionStart(id="op-ü2", text="对准那辆车 \U0001f681 go"),
        ),
        (
            "chunk-empty-sentinel",
            ChunkCmd(chunk=ActionChunk(t_inf=8.4, anchor=anchor, targets=(), step_dt=0.2)),
        ),
        (
            "chunk-three-targets",
            ChunkCmd(
                chunk=ActionChunk(
                    t_inf=4.2,
                    anchor=anchor,
                    targets=(
                        step,
                        LocalPose(x=0.8, y=-0.2, z=0.1, roll=0.0, pitch=0.0, yaw=-0.17),
                        LocalPose(x=1.2, y=-0.33, z=0.15, roll=0.0, pitch=0.0, yaw=-0.26),
                    ),
                    step_dt=0.2,
                )
            ),
        ),
        ("abort", Abort(id="op-7")),
        ("ack-accepted", Ack(ref="accepted:op-1")),
        ("ack-rejected-reason", Ack(ref="rejected:op-9:cannot-ground-instruction")),
        (
            "remote-query-empty-view",
            RemoteQuery(
                t=1.0,
                state=UavState(t=1.0, pose=origin),
                obs=Observation(pose=origin, visible=()),
                text="climb two meters",
            ),
        ),
        (
            "remote-query-sightings",
            RemoteQuery(
                t=9.8,
                state=moving,
                obs=Observation(
                    pose=moving.pose,
                    visible=(
                        Sighting(id="car-0", cls=ObjectClass.CAR, bearing=-0.4, elevation=0.1, range=12.5),
                        Sighting(id="person-2", cls=ObjectClass.PERSON, bearing=1.2, elevation=-0.05, range=6.25),
                        Sighting(id="gate-1", cls=ObjectClass.GATE, bearing=0.0, elevation=0.0, range=30.0),
                    ),
                ),
                text="pass between the gate posts",
            ),
        ),
    ]
    payload = [
        {"name": name, "hex": encode_message(m).hex(), "message": message_json(m)}
        for name, m in fixtures
    ]
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    print(f"wrote {len(payload)} fixtures to {OUT}")


if __name__ == "__main__":
    main()
