"""Live-socket tests for the bridge service.

Each test runs the server loop in a background thread at a fast tick
interval and talks to it over real TCP sockets — both as a raw
length-prefixed frame stream and as a WebSocket client.
"""

from __future__ import annotations

import base64
import hashlib
import io
import os
import socket
import threading
import time

import pytest

from uavbench import sim
from uavbench.bridge.messages import (
    Abort,
    Ack,
    ChunkCmd,
    FrameDecoder,
    FrameMeta,
    InstructionStart,
    RemoteQuery,
    Telemetry,
    encode_message,
)
from uavbench.bridge.schemes import TranscriptEntry
from uavbench.bridge.server import BridgeServer, format_entry, write_transcript
from uavbench.datamodel import TaskType, UavState
from uavbench.geo import LocalPose

TICK = 0.002  # wall-clock pacing for tests; sim time still advances 0.2 s/tick


@pytest.fixture
def approach_scene():
    instruction, scenario = sim.scenario_for_task(TaskType.APPROACH, seed=4)
    return instruction, scenario


class ServerHarness:
    """Run a BridgeServer loop in a thread until closed."""

    def __init__(self, scenario, **kwargs):
        self.trace = io.StringIO()
        kwargs.setdefault("trace", self.trace)
        self.server = BridgeServer(scenario, ("127.0.0.1", 0), **kwargs)
        self._stop = threading.Event()
        self.thread = threading.Thread(
            target=self.server.run,
            kwargs={"should_stop": self._stop.is_set, "tick_interval": TICK},
            daemon=True,
        )
        self.thread.start()

    @property
    def address(self):
        return self.server.address

    def stop(self):
        self._stop.set()
        self.thread.join(timeout=5.0)
        assert not self.thread.is_alive(), "server loop failed to stop"
        self.server.close()


@pytest.fixture
def harness(approach_scene):
    _, scenario = approach_scene
    h = ServerHarness(scenario)
    yield h
    h.stop()


class RawClient:
    """Raw TCP frame-stream client."""

    def __init__(self, address):
        self.sock = socket.create_connection(address, timeout=5.0)
        self.sock.settimeout(0.05)
        self.decoder = FrameDecoder()
        self.messages = []

    def send(self, message):
        self.sock.sendall(encode_message(message))

    def pump(self):
        try:
            data = self.sock.recv(65536)
        except socket.timeout:
            return
        if data:
            self.messages.extend(self.decoder.feed(data))

    def wait_for(self, predicate, *, timeout=5.0, desc="message"):
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            self.pump()
            for m in self.messages:
                if predicate(m):
                    return m
        raise AssertionError(f"no {desc} within {timeout}s: {self.messages[-5:]}")

    def close(self):
        self.sock.close()


class WsClient:
    """Minimal RFC 6455 client speaking binary frames."""

    def __init__(self, address):
        self.sock = socket.create_connection(address, timeout=5.0)
        self.key = base64.b64encode(os.urandom(16)).decode()
        request = (
            "GET /stream HTTP/1.1\r\n"
            f"Host: {address[0]}:{address[1]}\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Key: {self.key}\r\n"
            "Sec-WebSocket-Version: 13\r\n\r\n"
        )
        self.sock.sendall(request.encode())
        self.buf = bytearray()
        self.response = self._read_headers()
        self.decoder = FrameDecoder()
        self.messages = []
        self.pongs = []
        self.sock.settimeout(0.05)

    def _read_headers(self) -> str:
        self.sock.settimeout(5.0)
        while b"\r\n\r\n" not in self.buf:
            data = self.sock.recv(4096)
            if not data:
                raise AssertionError("server closed during handshake")
            self.buf += data
        end = self.buf.index(b"\r\n\r\n")
        head = bytes(self.buf[:end]).decode("latin-1")
        del self.buf[: end + 4]
        return head

    def accept_header(self) -> str:
        for line in self.response.split("\r\n")[1:]:
            name, _, value = line.partition(":")
            if name.strip().lower() == "sec-websocket-accept":
                return value.strip()
        raise AssertionError(f"no accept header in {self.response!r}")

    def send_frame(self, payload: bytes, opcode: int = 0x2):
        mask = os.urandom(4)
        header = bytearray([0x80 | opcode])
        n = len(payload)
        if n < 126:
            header.append(0x80 | n)
        elif n < 1 << 16:
            header.append(0x80 | 126)
            header += n.to_bytes(2, "big")
        else:
            header.append(0x80 | 127)
            header += n.to_bytes(8, "big")
        body = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
        self.sock.sendall(bytes(header) + mask + body)

    def send(self, message):
        self.send_frame(encode_message(message))

    def _next_frame(self):
        if len(self.buf) < 2:
            return None
        opcode = self.buf[0] & 0x0F
        length = self.buf[1] & 0x7F
        idx = 2
        if length == 126:
            if len(self.buf) < 4:
                return None
            length = int.from_bytes(self.buf[2:4], "big")
            idx = 4
        elif length == 127:
            if len(self.buf) < 10:
                return None
            length = int.from_bytes(self.buf[2:10], "big")
            idx = 10
        if len(self.buf) < idx + length:
            return None
        payload = bytes(self.buf[idx : idx + length])
        del self.buf[: idx + length]
        return opcode, payload

    def pump(self):
        try:
            data = self.sock.recv(65536)
            if data:
                self.buf += data
        except socket.timeout:
            pass
        while True:
            frame = self._next_frame()
            if frame is None:
                return
            opcode, payload = frame
            if opcode == 0x2:
                self.messages.extend(self.decoder.feed(payload))
            elif opcode == 0xA:
                self.pongs.append(payload)

    def wait_for(self, predicate, *, timeout=5.0, desc="message"):
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            self.pump()
            for m in self.messages:
                if predicate(m):
                    return m
        raise AssertionError(f"no {desc} within {timeout}s: {self.messages[-5:]}")

    def close(self):
        self.sock.close()


def ack_with(ref: str):
    return lambda m: isinstance(m, Ack) and m.ref == ref


# ---------------------------------------------------------------------------
# transport behavior


def test_raw_client_streams_idle_telemetry(harness, approach_scene):
    _, scenario = approach_scene
    client = RawClient(harness.address)
    client.send(Ack(ref="hello"))  # any inbound frame resolves the transport
    client.wait_for(
        lambda m: isinstance(m, Telemetry) and m.t >= 1.0, desc="telemetry"
    )
    client.close()
    telemetry = [m for m in client.messages if isinstance(m, Telemetry)]
    assert len(telemetry) >= 5
    times = [m.t for m in telemetry]
    assert times == sorted(times)
    steps = {round(b - a, 9) for a, b in zip(times, times[1:])}
    assert steps == {0.2}
    start = scenario.uav_start
    for m in telemetry:  # idle vehicle holds its start pose
        p = m.state.pose
        assert (p.x, p.y, p.z) == (start.x, start.y, start.z)


def test_silent_raw_listener_still_gets_stream(harness):
    client = RawClient(harness.address)  # never sends a byte
    client.wait_for(lambda m: isinstance(m, Telemetry), desc="telemetry")
    client.close()


def test_websocket_handshake_accept_key(harness):
    client = WsClient(harness.address)
    status = client.response.split("\r\n")[0]
    assert "101" in status
    digest = hashlib.sha1(
        (client.key + "258EAFA5-E914-47DA-95CA-C5AB0DC85B11").encode()
    ).digest()
    assert client.accept_header() == base64.b64encode(digest).decode()
    client.close()


def test_websocket_streams_telemetry_and_pongs(harness):
    client = WsClient(harness.address)
    client.send_frame(b"are-you-there", opcode=0x9)
    client.wait_for(lambda m: isinstance(m, Telemetry) and m.t >= 0.6)
    deadline = time.monotonic() + 5.0
    while not client.pongs and time.monotonic() < deadline:
        client.pump()
    assert client.pongs == [b"are-you-there"]
    telemetry = [m for m in client.messages if isinstance(m, Telemetry)]
    assert len(telemetry) >= 3
    client.close()


def test_raw_and_ws_clients_see_the_same_stream(harness):
    raw = RawClient(harness.address)
    raw.send(Ack(ref="hi"))
    ws = WsClient(harness.address)
    raw.wait_for(lambda m: isinstance(m, Telemetry) and m.t >= 1.0)
    ws.wait_for(lambda m: isinstance(m, Telemetry) and m.t >= 1.0)
    raw_t = {m.t for m in raw.messages if isinstance(m, Telemetry)}
    ws_t = {m.t for m in ws.messages if isinstance(m, Telemetry)}
    shared = raw_t & ws_t
    assert len(shared) >= 3  # overlapping window of the one broadcast stream
    raw.close()
    ws.close()


def test_garbage_bytes_drop_only_that_client(harness):
    bad = RawClient(harness.address)
    good = RawClient(harness.address)
    good.send(Ack(ref="hi"))
    bad.sock.sendall(b"\xff" * 64)  # implausible frame length
    deadline = time.monotonic() + 5.0
    closed = False
    while time.monotonic() < deadline and not closed:
        try:
            closed = bad.sock.recv(4096) == b""
        except socket.timeout:
            pass
    assert closed, "malformed client was not disconnected"
    good.wait_for(lambda m: isinstance(m, Telemetry), desc="telemetry")
    bad.close()
    good.close()


# ---------------------------------------------------------------------------
# instruction lifecycle


def test_instruction_round_trip(harness, approach_scene):
    instruction, scenario = approach_scene
    client = WsClient(harness.address)
    client.wait_for(lambda m: isinstance(m, Telemetry))
    client.send(InstructionStart(id="go-1", text=instruction.text))
    client.wait_for(ack_with("accepted:go-1"), desc="acceptance ack")
    client.wait_for(ack_with("done:go-1"), timeout=20.0, desc="done ack")

    chunks = [m for m in client.messages if isinstance(m, ChunkCmd)]
    # The stream ends with the planner's empty "schedule exhausted" chunk.
    assert chunks and any(len(c.chunk.targets) >= 1 for c in chunks)
    assert any(isinstance(m, FrameMeta) for m in client.messages)
    # The vehicle ends at the standoff point in front of the target.
    target = scenario.object_by_id(instruction.params["target"])
    final = [m for m in client.messages if isinstance(m, Telemetry)][-1]
    p = final.state.pose
    dist = ((p.x - target.x) ** 2 + (p.y - target.y) ** 2 + (p.z - target.z) ** 2) ** 0.5
    assert 0.5 <= dist <= 3.0 * 1.5 * target.radius
    client.close()

    trace = harness.trace.getvalue()
    assert "InstructionStart" in trace
    assert "accepted:go-1" in trace and "done:go-1" in trace


def test_second_instruction_rejected_while_busy(harness, approach_scene):
    instruction, _ = approach_scene
    client = RawClient(harness.address)
    client.send(InstructionStart(id="go-1", text=instruction.text))
    client.wait_for(ack_with("accepted:go-1"))
    client.send(InstructionStart(id="go-2", text=instruction.text))
    client.wait_for(ack_with("rejected:go-2:busy"), desc="busy rejection")
    client.close()


def test_ungroundable_instruction_rejected(harness):
    client = RawClient(harness.address)
    client.send(InstructionStart(id="go-1", text="calibrate the flux capacitor"))
    client.wait_for(
        ack_with("rejected:go-1:cannot-ground-instruction"), desc="rejection"
    )
    client.close()


def test_blank_instruction_rejected(harness):
    client = RawClient(harness.address)
    client.send(InstructionStart(id="go-1", text="   "))
    client.wait_for(ack_with("rejected:go-1:empty-instruction"), desc="rejection")
    client.close()


def test_instruction_for_unseen_object_rejected():
    # A scene with no objects cannot ground any target-directed command.
    scenario = sim.ScenarioSpec(
        objects=(), uav_start=LocalPose(0, 0, 2, 0, 0, 0), seed=0
    )
    h = ServerHarness(scenario)
    try:
        client = RawClient(h.address)
        client.send(InstructionStart(id="go-1", text="fly to the car"))
        client.wait_for(
            ack_with("rejected:go-1:cannot-ground-instruction"), desc="rejection"
        )
        client.close()
    finally:
        h.stop()


def test_abort_freezes_vehicle_within_one_tick(harness, approach_scene):
    instruction, _ = approach_scene
    client = RawClient(harness.address)
    client.send(InstructionStart(id="go-1", text=instruction.text))
    client.wait_for(ack_with("accepted:go-1"))
    # Let it fly a little, then pull the plug.
    client.wait_for(lambda m: isinstance(m, ChunkCmd), desc="first chunk")
    client.send(Abort(id="go-1"))
    aborted = client.wait_for(ack_with("aborted:go-1"), desc="abort ack")
    del aborted
    client.wait_for(
        lambda m: isinstance(m, Telemetry) and m.t >= _abort_time(client) + 1.0,
        timeout=10.0,
        desc="post-abort telemetry",
    )
    client.close()
    t_abort = _abort_time(client)
    after = [
        m.state.pose
        for m in client.messages
        if isinstance(m, Telemetry) and m.t > t_abort + 0.2 + 1e-9
    ]
    assert len(after) >= 2
    first = after[0]
    for p in after[1:]:  # position hold: no further motion at all
        assert (p.x, p.y, p.z, p.yaw) == (first.x, first.y, first.z, first.yaw)


def _abort_time(client) -> float:
    telemetry = [m.t for m in client.messages if isinstance(m, Telemetry)]
    acks = [m for m in client.messages if isinstance(m, Ack) and m.ref.startswith("aborted")]
    assert acks, "no abort ack seen"
    # The ack is broadcast on the tick it happened; bound it by the latest
    # telemetry timestamp seen before it in the stream.
    idx = client.messages.index(acks[0])
    before = [m.t for m in client.messages[:idx] if isinstance(m, Telemetry)]
    return before[-1] if before else (telemetry[0] if telemetry else 0.0)


def test_abort_for_unknown_id_rejected(harness):
    client = RawClient(harness.address)
    client.send(Abort(id="phantom"))
    client.wait_for(ack_with("rejected:phantom:no-such-instruction"), desc="rejection")
    client.close()


def test_remote_query_from_console_is_rejected(harness):
    client = RawClient(harness.address)
    state = UavState(t=0.0, pose=LocalPose(0, 0, 2, 0, 0, 0), velocity=(0, 0, 0))
    obs = sim.Observation(pose=state.pose, visible=())
    client.send(RemoteQuery(t=0.0, state=state, obs=obs, text="fly to the car"))
    client.wait_for(ack_with("rejected:query:not-a-policy-endpoint"), desc="rejection")
    client.close()


def test_vehicle_keeps_ticking_between_instructions(harness, approach_scene):
    instruction, _ = approach_scene
    client = RawClient(harness.address)
    client.send(InstructionStart(id="go-1", text=instruction.text))
    client.wait_for(ack_with("done:go-1"), timeout=20.0)
    done_idx = next(
        i
        for i, m in enumerate(client.messages)
        if isinstance(m, Ack) and m.ref == "done:go-1"
    )
    client.wait_for(
        lambda m: isinstance(m, Telemetry)
        and client.messages.index(m) > done_idx,
        desc="idle telemetry after done",
    )
    client.close()


# ---------------------------------------------------------------------------
# transcript formatting


def test_format_entry_lines_are_stable():
    state = UavState(
        t=1.2, pose=LocalPose(1.0, -2.5, 3.0, 0.0, 0.0, 0.5), velocity=(0, 0, 0)
    )
    entry = TranscriptEntry(t=1.2, sender="drone", message=Telemetry(t=1.2, state=state))
    assert (
        format_entry(entry)
        == "1.2\tdrone\tTelemetry\t1.000000 -2.500000 3.000000 0.500000"
    )
    entry = TranscriptEntry(
        t=0.0, sender="ground", message=InstructionStart(id="a", text="take off")
    )
    assert format_entry(entry) == "0.0\tground\tInstructionStart\ta take off"
    entry = TranscriptEntry(t=3.4, sender="drone", message=Ack(ref="done:a"))
    assert format_entry(entry) == "3.4\tdrone\tAck\tdone:a"


def test_write_transcript_round_trips_lines():
    state = UavState(t=0.2, pose=LocalPose(0, 0, 2, 0, 0, 0), velocity=(0, 0, 0))
    entries = [
        TranscriptEntry(t=0.0, sender="ground", message=InstructionStart(id="x", text="go up")),
        TranscriptEntry(t=0.2, sender="drone", message=Telemetry(t=0.2, state=state)),
    ]
    out = io.StringIO()
    write_transcript(entries, out)
    lines = out.getvalue().splitlines()
    assert len(lines) == 2
    assert all(len(line.split("\t")) == 4 for line in lines)
