/**
 * Binary frame format spoken between drone, ground station, and console.
 *
 * A frame is a 4-byte big-endian payload length followed by the payload; the
 * payload is a 1-byte message kind plus fixed-width fields.  Doubles are
 * big-endian IEEE 754, strings are 2-byte-length-prefixed UTF-8.  This module
 * mirrors the server's codec byte for byte; the cross-language fixtures under
 * test/fixtures pin that equivalence.
 */

export const LENGTH_PREFIX = 4;
/** One chunk of 64 targets is ~3 KiB; a megabyte means a corrupt stream. */
export const MAX_FRAME_BYTES = 1 << 20;

export class BridgeError extends Error {
  constructor(message: string) {
    super(message);
    this.name = new.target.name;
  }
}

export class FrameTooShort extends BridgeError {}

export class UnknownKind extends BridgeError {}

export class LengthMismatch extends BridgeError {}

export enum Kind {
  Telemetry = 1,
  FrameMeta = 2,
  InstructionStart = 3,
  ChunkCmd = 4,
  Abort = 5,
  Ack = 6,
  RemoteQuery = 7,
}

/** Pose in a flight-local ENU frame: meters position, radian attitude. */
export interface LocalPose {
  readonly x: number;
  readonly y: number;
  readonly z: number;
  readonly roll: number;
  readonly pitch: number;
  readonly yaw: number;
}

/** Instantaneous vehicle state: time, pose, and velocity in m/s. */
export interface UavState {
  readonly t: number;
  readonly pose: LocalPose;
  readonly velocity: readonly [number, number, number];
}

/**
 * A burst of body-frame waypoints from one inference call.  `targets` are
 * offsets relative to the anchor pose; scheduled arrival times step at
 * `stepDt` from `tInf`.  An empty target list is the task-complete sentinel.
 */
export interface ActionChunk {
  readonly tInf: number;
  readonly anchor: UavState;
  readonly targets: readonly LocalPose[];
  readonly stepDt: number;
}

export type ObjectClass =
  | "person"
  | "car"
  | "tree"
  | "marker"
  | "building"
  | "gate";

const OBJECT_CLASSES: ReadonlySet<string> = new Set([
  "person",
  "car",
  "tree",
  "marker",
  "building",
  "gate",
]);

export interface Sighting {
  readonly id: string;
  readonly cls: ObjectClass;
  readonly bearing: number;
  readonly elevation: number;
  readonly range: number;
}

export interface Observation {
  readonly pose: LocalPose;
  readonly visible: readonly Sighting[];
}

export interface Telemetry {
  readonly kind: Kind.Telemetry;
  readonly t: number;
  readonly state: UavState;
}

export interface FrameMeta {
  readonly kind: Kind.FrameMeta;
  readonly t: number;
  readonly obsRef: string;
}

export interface InstructionStart {
  readonly kind: Kind.InstructionStart;
  readonly id: string;
  readonly text: string;
}

export interface ChunkCmd {
  readonly kind: Kind.ChunkCmd;
  readonly chunk: ActionChunk;
}

export interface Abort {
  readonly kind: Kind.Abort;
  readonly id: string;
}

/** Status reference: `<status>:<id>` with an optional `:<reason>` tail. */
export interface Ack {
  readonly kind: Kind.Ack;
  readonly ref: string;
}

export interface RemoteQuery {
  readonly kind: Kind.RemoteQuery;
  readonly t: number;
  readonly state: UavState;
  readonly obs: Observation;
  readonly text: string;
}

export type BridgeMessage =
  | Telemetry
  | FrameMeta
  | InstructionStart
  | ChunkCmd
  | Abort
  | Ack
  | RemoteQuery;

const utf8Encoder = new TextEncoder();
const utf8Decoder = new TextDecoder("utf-8", { fatal: true });

class Writer {
  private parts: Uint8Array[] = [];

  u8(v: number): void {
    if (!Number.isInteger(v) || v < 0 || v > 0xff) {
      throw new LengthMismatch(`u8 field out of range: ${v}`);
    }
    this.parts.push(Uint8Array.of(v));
  }

  u16(v: number): void {
    if (!Number.isInteger(v) || v < 0 || v > 0xffff) {
      throw new LengthMismatch(`u16 field out of range: ${v}`);
    }
    const b = new Uint8Array(2);
    new DataView(b.buffer).setUint16(0, v, false);
    this.parts.push(b);
  }

  f64(...vs: number[]): void {
    const b = new Uint8Array(8 * vs.length);
    const view = new DataView(b.buffer);
    vs.forEach((v, i) => view.setFloat64(8 * i, v, false));
    this.parts.push(b);
  }

  text(s: string): void {
    const raw = utf8Encoder.encode(s);
    if (raw.length > 0xffff) {
      throw new LengthMismatch(`string field of ${raw.length} bytes exceeds u16`);
    }
    this.u16(raw.length);
    this.parts.push(raw);
  }

  pose(p: LocalPose): void {
    this.f64(p.x, p.y, p.z, p.roll, p.pitch, p.yaw);
  }

  state(s: UavState): void {
    this.f64(s.t);
    this.pose(s.pose);
    this.f64(...s.velocity);
  }

  payload(): Uint8Array {
    let total = 0;
    for (const part of this.parts) total += part.length;
    const out = new Uint8Array(total);
    let at = 0;
    for (const part of this.parts) {
      out.set(part, at);
      at += part.length;
    }
    return out;
  }
}

class Reader {
  private readonly view: DataView;
  private pos = 0;

  constructor(private readonly data: Uint8Array) {
    this.view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  }

  private take(n: number): number {
    if (this.pos + n > this.data.length) {
      throw new FrameTooShort(
        `need ${n} bytes at offset ${this.pos}, have ${this.data.length}`,
      );
    }
    const at = this.pos;
    this.pos += n;
    return at;
  }

  u8(): number {
    return this.view.getUint8(this.take(1));
  }

  u16(): number {
    return this.view.getUint16(this.take(2), false);
  }

  f64(): number {
    return this.view.getFloat64(this.take(8), false);
  }

  text(): string {
    const n = this.u16();
    const at = this.take(n);
    try {
      return utf8Decoder.decode(this.data.subarray(at, at + n));
    } catch (e) {
      throw new LengthMismatch(`string field is not UTF-8: ${String(e)}`);
    }
  }

  pose(): LocalPose {
    return {
      x: this.f64(),
      y: this.f64(),
      z: this.f64(),
      roll: this.f64(),
      pitch: this.f64(),
      yaw: this.f64(),
    };
  }

  state(): UavState {
    const t = this.f64();
    const pose = this.pose();
    const velocity: [number, number, number] = [this.f64(), this.f64(), this.f64()];
    return { t, pose, velocity };
  }

  done(): void {
    if (this.pos !== this.data.length) {
      throw new LengthMismatch(
        `${this.data.length - this.pos} bytes of trailing payload`,
      );
    }
  }
}

function writeChunk(w: Writer, chunk: ActionChunk): void {
  w.f64(chunk.tInf);
  w.state(chunk.anchor);
  w.f64(chunk.stepDt);
  w.u16(chunk.targets.length);
  for (const target of chunk.targets) w.pose(target);
}

function readChunk(r: Reader): ActionChunk {
  const tInf = r.f64();
  const anchor = r.state();
  const stepDt = r.f64();
  const count = r.u16();
  const targets: LocalPose[] = [];
  for (let i = 0; i < count; i++) targets.push(r.pose());
  return { tInf, anchor, targets, stepDt };
}

function writeObs(w: Writer, obs: Observation): void {
  w.pose(obs.pose);
  w.u16(obs.visible.length);
  for (const s of obs.visible) {
    w.text(s.id);
    w.text(s.cls);
    w.f64(s.bearing, s.elevation, s.range);
  }
}

function readObs(r: Reader): Observation {
  const pose = r.pose();
  const count = r.u16();
  const visible: Sighting[] = [];
  for (let i = 0; i < count; i++) {
    const id = r.text();
    const clsValue = r.text();
    if (!OBJECT_CLASSES.has(clsValue)) {
      throw new UnknownKind(`unknown object class ${JSON.stringify(clsValue)}`);
    }
    const bearing = r.f64();
    const elevation = r.f64();
    const range = r.f64();
    visible.push({ id, cls: clsValue as ObjectClass, bearing, elevation, range });
  }
  return { pose, visible };
}

export function encodeMessage(m: BridgeMessage): Uint8Array {
  const w = new Writer();
  switch (m.kind) {
    case Kind.Telemetry:
      w.u8(Kind.Telemetry);
      w.f64(m.t);
      w.state(m.state);
      break;
    case Kind.FrameMeta:
      w.u8(Kind.FrameMeta);
      w.f64(m.t);
      w.text(m.obsRef);
      break;
    case Kind.InstructionStart:
      w.u8(Kind.InstructionStart);
      w.text(m.id);
      w.text(m.text);
      break;
    case Kind.ChunkCmd:
      w.u8(Kind.ChunkCmd);
      writeChunk(w, m.chunk);
      break;
    case Kind.Abort:
      w.u8(Kind.Abort);
      w.text(m.id);
      break;
    case Kind.Ack:
      w.u8(Kind.Ack);
      w.text(m.ref);
      break;
    case Kind.RemoteQuery:
      w.u8(Kind.RemoteQuery);
      w.f64(m.t);
      w.state(m.state);
      writeObs(w, m.obs);
      w.text(m.text);
      break;
    default: {
      const unreachable: never = m;
      throw new UnknownKind(`cannot encode ${JSON.stringify(unreachable)}`);
    }
  }
  const payload = w.payload();
  const out = new Uint8Array(LENGTH_PREFIX + payload.length);
  new DataView(out.buffer).setUint32(0, payload.length, false);
  out.set(payload, LENGTH_PREFIX);
  return out;
}

function decodePayload(payload: Uint8Array): BridgeMessage {
  const r = new Reader(payload);
  const kindByte = r.u8();
  let m: BridgeMessage;
  switch (kindByte) {
    case Kind.Telemetry:
      m = { kind: Kind.Telemetry, t: r.f64(), state: r.state() };
      break;
    case Kind.FrameMeta:
      m = { kind: Kind.FrameMeta, t: r.f64(), obsRef: r.text() };
      break;
    case Kind.InstructionStart:
      m = { kind: Kind.InstructionStart, id: r.text(), text: r.text() };
      break;
    case Kind.ChunkCmd:
      m = { kind: Kind.ChunkCmd, chunk: readChunk(r) };
      break;
    case Kind.Abort:
      m = { kind: Kind.Abort, id: r.text() };
      break;
    case Kind.Ack:
      m = { kind: Kind.Ack, ref: r.text() };
      break;
    case Kind.RemoteQuery:
      m = {
        kind: Kind.RemoteQuery,
        t: r.f64(),
        state: r.state(),
        obs: readObs(r),
        text: r.text(),
      };
      break;
    default:
      throw new UnknownKind(`unknown message kind ${kindByte}`);
  }
  r.done();
  return m;
}

/** Decode exactly one complete frame (length prefix included). */
export function decodeMessage(data: Uint8Array): BridgeMessage {
  if (data.length < LENGTH_PREFIX + 1) {
    throw new FrameTooShort(`frame of ${data.length} bytes has no payload`);
  }
  const length = new DataView(data.buffer, data.byteOffset, data.byteLength).getUint32(
    0,
    false,
  );
  if (length > MAX_FRAME_BYTES) {
    throw new LengthMismatch(`declared payload of ${length} bytes is implausible`);
  }
  if (data.length - LENGTH_PREFIX !== length) {
    throw new LengthMismatch(
      `declared ${length} payload bytes, got ${data.length - LENGTH_PREFIX}`,
    );
  }
  return decodePayload(data.subarray(LENGTH_PREFIX));
}

/** Incremental decoder for a byte stream of concatenated frames. */
export class FrameDecoder {
  private buf = new Uint8Array(0);

  feed(data: Uint8Array): BridgeMessage[] {
    if (data.length > 0) {
      const next = new Uint8Array(this.buf.length + data.length);
      next.set(this.buf, 0);
      next.set(data, this.buf.length);
      this.buf = next;
    }
    const out: BridgeMessage[] = [];
    for (;;) {
      if (this.buf.length < LENGTH_PREFIX) {
        return out;
      }
      const length = new DataView(
        this.buf.buffer,
        this.buf.byteOffset,
        this.buf.byteLength,
      ).getUint32(0, false);
      if (length > MAX_FRAME_BYTES) {
        throw new LengthMismatch(
          `declared payload of ${length} bytes is implausible`,
        );
      }
      const end = LENGTH_PREFIX + length;
      if (this.buf.length < end) {
        return out;
      }
      const payload = this.buf.subarray(LENGTH_PREFIX, end);
      const message = decodePayload(payload);
      this.buf = this.buf.slice(end);
      out.push(message);
    }
  }

  get pendingBytes(): number {
    return this.buf.length;
  }
}
