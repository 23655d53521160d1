"""Live bridge service: one listen address speaking the wire format.

The server runs a simulated vehicle in real time and serves any number of
clients on a single port.  A connection that opens with an HTTP GET is
upgraded to a WebSocket (RFC 6455) carrying one bridge frame per binary
message; any other connection is treated as a raw length-prefixed frame
stream.  Clients receive live Telemetry/FrameMeta plus the command traffic
of the active instruction, and may send InstructionStart and Abort.
"""

from __future__ import annotations

import base64
import hashlib
import selectors
import socket
import time
from collections import deque
from dataclasses import dataclass
from typing import IO, Callable

from uavbench import sim
from uavbench.bridge.latency import LatencyModel
from uavbench.bridge.messages import (
    Abort,
    Ack,
    BridgeError,
    BridgeMessage,
    ChunkCmd,
    FrameDecoder,
    FrameMeta,
    InstructionStart,
    RemoteQuery,
    Telemetry,
    encode_message,
)
from uavbench.bridge.policies import LocalOracle, Policy, bind_instruction
from uavbench.bridge.schemes import SchemeConfig, SchemeRunner, TranscriptEntry
from uavbench.datamodel import ActionChunk, UavState, fmt_fixed
from uavbench.errors import HarnessError

__all__ = ["BridgeServer", "format_entry", "write_transcript"]

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
_MAX_HTTP_HEADER = 16 * 1024
# A connection that stays silent this many sim ticks is a passive raw-frame
# listener; websocket clients always open with their handshake request.
_DETECT_GRACE_TICKS = 5


def _ws_accept_key(key: str) -> str:
    digest = hashlib.sha1((key + _WS_GUID).encode()).digest()
    return base64.b64encode(digest).decode()


def _ws_wrap(payload: bytes, opcode: int = 0x2) -> bytes:
    header = bytearray([0x80 | opcode])
    n = len(payload)
    if n < 126:
        header.append(n)
    elif n < 1 << 16:
        header.append(126)
        header += n.to_bytes(2, "big")
    else:
        header.append(127)
        header += n.to_bytes(8, "big")
    return bytes(header) + payload


class _Client:
    """One connection; transport mode is sniffed from the first bytes."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.mode = "detect"  # detect | raw | ws-handshake | ws
        self.buf = bytearray()
        self.decoder = FrameDecoder()
        self.out = bytearray()
        self.silent_ticks = 0
        # Frames queued before the transport is known; flushed on resolution
        # so a freshly connected client still gets the live stream.
        self.backlog: deque[bytes] = deque(maxlen=600)

    def queue_frame(self, frame: bytes) -> None:
        if self.mode == "ws":
            self.out += _ws_wrap(frame)
        elif self.mode == "raw":
            self.out += frame
        else:
            self.backlog.append(frame)

    def _release_backlog(self) -> None:
        backlog, self.backlog = self.backlog, deque(maxlen=600)
        for frame in backlog:
            self.queue_frame(frame)

    def resolve_silent(self) -> None:
        """Classify a connection that never sent anything as a raw listener."""
        if self.mode == "detect" and not self.buf:
            self.silent_ticks += 1
            if self.silent_ticks >= _DETECT_GRACE_TICKS:
                self.mode = "raw"
                self._release_backlog()

    def on_bytes(self, data: bytes) -> list[BridgeMessage]:
        self.buf += data
        if self.mode == "detect":
            probe = b"GET "
            if self.buf[: len(probe)] == probe[: len(self.buf)]:
                if len(self.buf) < len(probe):
                    return []
                self.mode = "ws-handshake"
            else:
                self.mode = "raw"
                self._release_backlog()
        if self.mode == "ws-handshake":
            self._try_handshake()
            if self.mode != "ws":
                return []
        if self.mode == "raw":
            data, self.buf = bytes(self.buf), bytearray()
            return self.decoder.feed(data)
        return self._drain_ws()

    def _try_handshake(self) -> None:
        end = self.buf.find(b"\r\n\r\n")
        if end < 0:
            if len(self.buf) > _MAX_HTTP_HEADER:
                raise BridgeError("oversized websocket handshake request")
            return
        head = bytes(self.buf[:end]).decode("latin-1")
        del self.buf[: end + 4]
        key = None
        for line in head.split("\r\n")[1:]:
            name, _, value = line.partition(":")
            if name.strip().lower() == "sec-websocket-key":
                key = value.strip()
        if key is None:
            raise BridgeError("websocket handshake without Sec-WebSocket-Key")
        response = (
            "HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {_ws_accept_key(key)}\r\n\r\n"
        )
        self.out += response.encode("latin-1")
        self.mode = "ws"
        self._release_backlog()

    def _drain_ws(self) -> list[BridgeMessage]:
        messages: list[BridgeMessage] = []
        while True:
            frame = self._next_ws_frame()
            if frame is None:
                return messages
            opcode, payload = frame
            if opcode in (0x0, 0x1, 0x2):
                # Bridge frames are self-delimiting, so websocket message
                # boundaries (and fragmentation) do not matter: every data
                # payload feeds the same frame decoder.
                messages.extend(self.decoder.feed(payload))
            elif opcode == 0x8:  # close
                raise BridgeError("websocket peer sent close")
            elif opcode == 0x9:  # ping -> pong
                self.out += _ws_wrap(payload, opcode=0xA)

    def _next_ws_frame(self) -> tuple[int, bytes] | None:
        buf = self.buf
        if len(buf) < 2:
            return None
        opcode = buf[0] & 0x0F
        masked = bool(buf[1] & 0x80)
        length = buf[1] & 0x7F
        idx = 2
        if length == 126:
            if len(buf) < 4:
                return None
            length = int.from_bytes(buf[2:4], "big")
            idx = 4
        elif length == 127:
            if len(buf) < 10:
                return None
            length = int.from_bytes(buf[2:10], "big")
            idx = 10
        need = idx + (4 if masked else 0) + length
        if len(buf) < need:
            return None
        if masked:
            mask = buf[idx : idx + 4]
            idx += 4
            payload = bytes(b ^ mask[i % 4] for i, b in enumerate(buf[idx:need]))
        else:
            payload = bytes(buf[idx:need])
        del buf[:need]
        return opcode, payload


@dataclass
class _RebasedPolicy:
    """Presents a task-local clock to a policy on a continuously running sim.

    The wrapped policy sees time measured from the instruction start; the
    returned chunk is re-stamped into the server's absolute clock.
    """

    inner: Policy
    t0: float

    def decide(self, state, obs, instruction) -> ActionChunk:
        local = UavState(
            t=state.t - self.t0, pose=state.pose, velocity=state.velocity
        )
        chunk = self.inner.decide(local, obs, instruction)
        return ActionChunk(
            t_inf=state.t,
            anchor=state,
            targets=chunk.targets,
            step_dt=chunk.step_dt,
        )


def format_entry(e: TranscriptEntry) -> str:
    """One stable, human-scannable line per transcript entry."""
    m = e.message
    if isinstance(m, Telemetry):
        p = m.state.pose
        detail = " ".join(fmt_fixed(v) for v in (p.x, p.y, p.z, p.yaw))
    elif isinstance(m, FrameMeta):
        detail = m.obs_ref
    elif isinstance(m, InstructionStart):
        detail = f"{m.id} {m.text}"
    elif isinstance(m, ChunkCmd):
        detail = f"{len(m.chunk.targets)} targets t_inf={fmt_fixed(m.chunk.t_inf)}"
    elif isinstance(m, Abort):
        detail = m.id
    elif isinstance(m, Ack):
        detail = m.ref
    elif isinstance(m, RemoteQuery):
        detail = m.text
    else:  # pragma: no cover - message union is closed
        detail = repr(m)
    return f"{fmt_fixed(e.t, 1)}\t{e.sender}\t{type(m).__name__}\t{detail}"


def write_transcript(entries: list[TranscriptEntry], stream: IO[str]) -> None:
    for e in entries:
        stream.write(format_entry(e) + "\n")


class BridgeServer:
    """Real-time single-vehicle bridge endpoint.

    One instruction may be active at a time; between instructions the sim
    keeps ticking and clients keep receiving idle telemetry.
    """

    def __init__(
        self,
        spec: sim.ScenarioSpec,
        listen: tuple[str, int] = ("127.0.0.1", 0),
        *,
        cfg: SchemeConfig | None = None,
        lat: LatencyModel | None = None,
        policy: Policy | None = None,
        policy_factory: Callable[[], Policy] | None = None,
        params: sim.SimParams = sim.DEFAULT_SIM_PARAMS,
        trace: IO[str] | None = None,
        seed: int = 0,
    ):
        self.spec = spec
        self.cfg = cfg or SchemeConfig()
        self.lat = lat or LatencyModel()
        self.params = params
        self.trace = trace
        self.seed = seed
        if policy_factory is not None:
            self._policy_factory = policy_factory
        elif policy is not None:
            self._policy_factory = lambda: policy
        else:
            self._policy_factory = lambda: LocalOracle(spec, params)
        self.world = sim.make_world(spec)
        self.runner: SchemeRunner | None = None
        self._sent_upto = 0
        self._instruction_count = 0

        self.listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self.listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self.listener.bind(listen)
        self.listener.listen(16)
        self.listener.setblocking(False)
        self.sel = selectors.DefaultSelector()
        self.sel.register(self.listener, selectors.EVENT_READ, None)
        self.clients: dict[socket.socket, _Client] = {}

    @property
    def address(self) -> tuple[str, int]:
        return self.listener.getsockname()

    # -- connection plumbing --

    def _accept(self) -> None:
        while True:
            try:
                conn, _ = self.listener.accept()
            except (BlockingIOError, OSError):
                return
            conn.setblocking(False)
            client = _Client(conn)
            self.clients[conn] = client
            self.sel.register(conn, selectors.EVENT_READ, client)

    def _drop(self, client: _Client) -> None:
        self.sel.unregister(client.sock)
        del self.clients[client.sock]
        client.sock.close()

    def _read(self, client: _Client) -> None:
        try:
            data = client.sock.recv(65536)
        except BlockingIOError:
            return
        except OSError:
            self._drop(client)
            return
        if not data:
            self._drop(client)
            return
        try:
            for message in client.on_bytes(data):
                self._handle_message(client, message)
        except (BridgeError, HarnessError, UnicodeDecodeError):
            self._drop(client)

    def _flush(self) -> None:
        for client in list(self.clients.values()):
            if not client.out:
                continue
            try:
                sent = client.sock.send(client.out)
                del client.out[:sent]
            except BlockingIOError:
                continue
            except OSError:
                self._drop(client)

    def _broadcast(self, entry: TranscriptEntry) -> None:
        if self.trace is not None:
            self.trace.write(format_entry(entry) + "\n")
        if isinstance(entry.message, RemoteQuery):
            return  # policy traffic is logged but not fanned out
        frame = encode_message(entry.message)
        for client in self.clients.values():
            client.queue_frame(frame)

    # -- operator commands --

    def _ack(self, client: _Client, ref: str) -> None:
        entry = TranscriptEntry(t=self.world.clock, sender="drone", message=Ack(ref=ref))
        if self.trace is not None:
            self.trace.write(format_entry(entry) + "\n")
        client.queue_frame(encode_message(entry.message))

    def _handle_message(self, client: _Client, m: BridgeMessage) -> None:
        if isinstance(m, InstructionStart):
            self._start_instruction(client, m)
        elif isinstance(m, Abort):
            runner = self.runner
            if runner is not None and runner.instruction_id == m.id:
                runner.abort()
            else:
                self._ack(client, f"rejected:{m.id}:no-such-instruction")
        elif isinstance(m, RemoteQuery):
            self._ack(client, "rejected:query:not-a-policy-endpoint")
        # Telemetry/FrameMeta/ChunkCmd/Ack from clients carry no commands.

    def _start_instruction(self, client: _Client, m: InstructionStart) -> None:
        if self.runner is not None:
            self._ack(client, f"rejected:{m.id}:busy")
            return
        if not m.text.strip():
            self._ack(client, f"rejected:{m.id}:empty-instruction")
            return
        obs = sim.observe(self.world, self.params)
        instruction = bind_instruction(m.text, obs)
        if instruction is None:
            self._ack(client, f"rejected:{m.id}:cannot-ground-instruction")
            return
        policy = _RebasedPolicy(self._policy_factory(), t0=self.world.clock)
        self._instruction_count += 1
        self.runner = SchemeRunner(
            self.cfg,
            self.lat,
            policy,
            self.world,
            instruction,
            instruction_id=m.id,
            params=self.params,
            seed=self.seed + self._instruction_count,
        )
        self._sent_upto = 0

    # -- simulation --

    def _tick(self) -> None:
        for client in self.clients.values():
            client.resolve_silent()
        if self.runner is not None:
            self.runner.tick()
            self.world = self.runner.world
            transcript = self.runner.transcript
            for entry in transcript[self._sent_upto :]:
                self._broadcast(entry)
            self._sent_upto = len(transcript)
            if self.runner.done:
                self.runner = None
        else:
            self.world = sim.step(self.world, sim.HOLD, self.cfg.step_dt, self.params)
            state = self.world.uav
            self._broadcast(
                TranscriptEntry(
                    t=self.world.clock,
                    sender="drone",
                    message=Telemetry(t=state.t, state=state),
                )
            )

    def run(
        self,
        *,
        ticks: int | None = None,
        should_stop: Callable[[], bool] | None = None,
        tick_interval: float | None = None,
    ) -> None:
        """Serve until `ticks` sim ticks elapse or `should_stop()` is true.

        `tick_interval` is the wall-clock pacing (defaults to the sim tick,
        i.e. real time); tests may shrink it to run faster than real time.
        """
        interval = self.cfg.step_dt if tick_interval is None else tick_interval
        next_tick = time.monotonic() + interval
        remaining = ticks
        while True:
            if should_stop is not None and should_stop():
                self._flush()
                return
            timeout = max(0.0, next_tick - time.monotonic())
            for key, _ in self.sel.select(timeout):
                if key.data is None:
                    self._accept()
                else:
                    self._read(key.data)
            if time.monotonic() >= next_tick:
                self._tick()
                next_tick += interval
                if remaining is not None:
                    remaining -= 1
                    if remaining <= 0:
                        self._flush()
                        return
            self._flush()

    def close(self) -> None:
        for client in list(self.clients.values()):
            self._drop(client)
        self.sel.unregister(self.listener)
        self.listener.close()
        self.sel.close()
