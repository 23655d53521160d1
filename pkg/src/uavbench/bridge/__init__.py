"""Ground-drone collaboration layer: framing, latency, policies, schemes."""

from uavbench.bridge.latency import LATENCY_PRESETS, LatencyModel
from uavbench.bridge.messages import (
    Abort,
    Ack,
    BridgeError,
    ChunkCmd,
    FrameDecoder,
    FrameTooShort,
    FrameMeta,
    InstructionStart,
    LengthMismatch,
    RemoteQuery,
    Telemetry,
    UnknownKind,
    decode_message,
    encode_message,
)
from uavbench.bridge.policies import (
    LocalOracle,
    MalformedChunk,
    Policy,
    PolicyError,
    RemotePolicy,
    RemoteTimeout,
)
from uavbench.bridge.schemes import (
    EmptyChunk,
    RunResult,
    SchemeConfig,
    SchemeKind,
    SchemeRunner,
    TargetQueue,
    align_chunk_global,
    prune_passed,
    run_scheme,
)

__all__ = [
    "Abort",
    "Ack",
    "BridgeError",
    "ChunkCmd",
    "EmptyChunk",
    "FrameDecoder",
    "FrameMeta",
    "FrameTooShort",
    "InstructionStart",
    "LATENCY_PRESETS",
    "LatencyModel",
    "LengthMismatch",
    "LocalOracle",
    "MalformedChunk",
    "Policy",
    "PolicyError",
    "RemotePolicy",
    "RemoteQuery",
    "RemoteTimeout",
    "RunResult",
    "SchemeConfig",
    "SchemeKind",
    "SchemeRunner",
    "TargetQueue",
    "Telemetry",
    "UnknownKind",
    "align_chunk_global",
    "decode_message",
    "encode_message",
    "prune_passed",
    "run_scheme",
]
