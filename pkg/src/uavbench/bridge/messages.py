"""Binary frame format spoken between drone, ground station, and console.

A frame is a 4-byte big-endian payload length followed by the payload; the
payload is a 1-byte message kind plus fixed-width fields.  Doubles are
big-endian IEEE 754, strings are 2-byte-length-prefixed UTF-8.  The format
carries no version negotiation: it is an internal wire for one release, and
the kind byte leaves room to add messages compatibly.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

from uavbench.datamodel import ActionChunk, UavState
from uavbench.errors import HarnessError
from uavbench.geo import LocalPose
from uavbench.sim import Observation, Sighting, ObjectClass

LENGTH_PREFIX = 4
# One chunk of 64 targets is ~3 KiB; a megabyte means a corrupt stream.
MAX_FRAME_BYTES = 1 << 20


class BridgeError(HarnessError):
    pass


class FrameTooShort(BridgeError):
    pass


class UnknownKind(BridgeError):
    pass


class LengthMismatch(BridgeError):
    pass


class Kind(enum.IntEnum):
    TELEMETRY = 1
    FRAME_META = 2
    INSTRUCTION_START = 3
    CHUNK_CMD = 4
    ABORT = 5
    ACK = 6
    REMOTE_QUERY = 7


@dataclass(frozen=True)
class Telemetry:
    t: float
    state: UavState


@dataclass(frozen=True)
class FrameMeta:
    t: float
    obs_ref: str


@dataclass(frozen=True)
class InstructionStart:
    id: str
    text: str


@dataclass(frozen=True)
class ChunkCmd:
    chunk: ActionChunk


@dataclass(frozen=True)
class Abort:
    id: str


@dataclass(frozen=True)
class Ack:
    """Status reference: '<status>:<id>' with an optional ':<reason>' tail."""

    ref: str


@dataclass(frozen=True)
class RemoteQuery:
    t: float
    state: UavState
    obs: Observation
    text: str


BridgeMessage = (
    Telemetry | FrameMeta | InstructionStart | ChunkCmd | Abort | Ack | RemoteQuery
)


class _Writer:
    def __init__(self) -> None:
        self.parts: list[bytes] = []

    def u8(self, v: int) -> None:
        self.parts.append(struct.pack(">B", v))

    def u16(self, v: int) -> None:
        self.parts.append(struct.pack(">H", v))

    def f64(self, *vs: float) -> None:
        self.parts.append(struct.pack(f">{len(vs)}d", *vs))

    def text(self, s: str) -> None:
        raw = s.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise LengthMismatch(f"string field of {len(raw)} bytes exceeds u16")
        self.u16(len(raw))
        self.parts.append(raw)

    def pose(self, p: LocalPose) -> None:
        self.f64(p.x, p.y, p.z, p.roll, p.pitch, p.yaw)

    def state(self, s: UavState) -> None:
        self.f64(s.t)
        self.pose(s.pose)
        self.f64(*s.velocity)

    def payload(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def _take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FrameTooShort(
                f"need {n} bytes at offset {self.pos}, have {len(self.data)}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self._take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self._take(2))[0]

    def f64(self, n: int = 1):
        vals = struct.unpack(f">{n}d", self._take(8 * n))
        return vals[0] if n == 1 else vals

    def text(self) -> str:
        n = self.u16()
        try:
            return self._take(n).decode("utf-8")
        except UnicodeDecodeError as e:
            raise LengthMismatch(f"string field is not UTF-8: {e}")

    def pose(self) -> LocalPose:
        return LocalPose(*self.f64(6))

    def state(self) -> UavState:
        t = self.f64()
        pose = self.pose()
        velocity = self.f64(3)
        return UavState(t=t, pose=pose, velocity=velocity)

    def done(self) -> None:
        if self.pos != len(self.data):
            raise LengthMismatch(
                f"{len(self.data) - self.pos} bytes of trailing payload"
            )


def _write_chunk(w: _Writer, chunk: ActionChunk) -> None:
    w.f64(chunk.t_inf)
    w.state(chunk.anchor)
    w.f64(chunk.step_dt)
    w.u16(len(chunk.targets))
    for target in chunk.targets:
        w.pose(target)


def _read_chunk(r: _Reader) -> ActionChunk:
    t_inf = r.f64()
    anchor = r.state()
    step_dt = r.f64()
    count = r.u16()
    targets = tuple(r.pose() for _ in range(count))
    return ActionChunk(t_inf=t_inf, anchor=anchor, targets=targets, step_dt=step_dt)


def _write_obs(w: _Writer, obs: Observation) -> None:
    w.pose(obs.pose)
    w.u16(len(obs.visible))
    for s in obs.visible:
        w.text(s.id)
        w.text(s.cls.value)
        w.f64(s.bearing, s.elevation, s.range)


def _read_obs(r: _Reader) -> Observation:
    pose = r.pose()
    count = r.u16()
    visible = []
    for _ in range(count):
        sid = r.text()
        cls_value = r.text()
        try:
            cls = ObjectClass(cls_value)
        except ValueError:
            raise UnknownKind(f"unknown object class {cls_value!r}")
        bearing, elevation, rng = r.f64(3)
        visible.append(
            Sighting(id=sid, cls=cls, bearing=bearing, elevation=elevation, range=rng)
        )
    return Observation(pose=pose, visible=tuple(visible))


def encode_message(m: BridgeMessage) -> bytes:
    w = _Writer()
    if isinstance(m, Telemetry):
        w.u8(Kind.TELEMETRY)
        w.f64(m.t)
        w.state(m.state)
    elif isinstance(m, FrameMeta):
        w.u8(Kind.FRAME_META)
        w.f64(m.t)
        w.text(m.obs_ref)
    elif isinstance(m, InstructionStart):
        w.u8(Kind.INSTRUCTION_START)
        w.text(m.id)
        w.text(m.text)
    elif isinstance(m, ChunkCmd):
        w.u8(Kind.CHUNK_CMD)
        _write_chunk(w, m.chunk)
    elif isinstance(m, Abort):
        w.u8(Kind.ABORT)
        w.text(m.id)
    elif isinstance(m, Ack):
        w.u8(Kind.ACK)
        w.text(m.ref)
    elif isinstance(m, RemoteQuery):
        w.u8(Kind.REMOTE_QUERY)
        w.f64(m.t)
        w.state(m.state)
        _write_obs(w, m.obs)
        w.text(m.text)
    else:
        raise UnknownKind(f"cannot encode {type(m).__name__}")
    payload = w.payload()
    return struct.pack(">I", len(payload)) + payload


def _decode_payload(payload: bytes) -> BridgeMessage:
    r = _Reader(payload)
    kind_byte = r.u8()
    try:
        kind = Kind(kind_byte)
    except ValueError:
        raise UnknownKind(f"unknown message kind {kind_byte}")
    if kind is Kind.TELEMETRY:
        m: BridgeMessage = Telemetry(t=r.f64(), state=r.state())
    elif kind is Kind.FRAME_META:
        m = FrameMeta(t=r.f64(), obs_ref=r.text())
    elif kind is Kind.INSTRUCTION_START:
        m = InstructionStart(id=r.text(), text=r.text())
    elif kind is Kind.CHUNK_CMD:
        m = ChunkCmd(chunk=_read_chunk(r))
    elif kind is Kind.ABORT:
        m = Abort(id=r.text())
    elif kind is Kind.ACK:
        m = Ack(ref=r.text())
    else:
        m = RemoteQuery(t=r.f64(), state=r.state(), obs=_read_obs(r), text=r.text())
    r.done()
    return m


def decode_message(data: bytes) -> BridgeMessage:
    """Decode exactly one complete frame (length prefix included)."""
    if len(data) < LENGTH_PREFIX + 1:
        raise FrameTooShort(f"frame of {len(data)} bytes has no payload")
    (length,) = struct.unpack(">I", data[:LENGTH_PREFIX])
    if length > MAX_FRAME_BYTES:
        raise LengthMismatch(f"declared payload of {length} bytes is implausible")
    if len(data) - LENGTH_PREFIX != length:
        raise LengthMismatch(
            f"declared {length} payload bytes, got {len(data) - LENGTH_PREFIX}"
        )
    return _decode_payload(data[LENGTH_PREFIX:])


class FrameDecoder:
    """Incremental decoder for a byte stream of concatenated frames."""

    def __init__(self) -> None:
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[BridgeMessage]:
        self._buf.extend(data)
        out: list[BridgeMessage] = []
        while True:
            if len(self._buf) < LENGTH_PREFIX:
                return out
            (length,) = struct.unpack(">I", bytes(self._buf[:LENGTH_PREFIX]))
            if length > MAX_FRAME_BYTES:
                raise LengthMismatch(
                    f"declared payload of {length} bytes is implausible"
                )
            end = LENGTH_PREFIX + length
            if len(self._buf) < end:
                return out
            payload = bytes(self._buf[LENGTH_PREFIX:end])
            del self._buf[:end]
            out.append(_decode_payload(payload))

    @property
    def pending_bytes(self) -> int:
        return len(self._buf)
