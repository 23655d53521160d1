/**
 * Operator console session: one bridge connection, the state it projects,
 * and the two commands an operator may issue (instruction, abort).
 *
 * The session is transport-agnostic: a `TransportFactory` supplies the byte
 * stream, so the browser passes a WebSocket adapter while tests pass fakes.
 * All mutation happens through `handleOpen` / `handleBytes` / `handleClose`
 * plus the two command methods; callers deliver those in arrival order and
 * the session guarantees the invariants below:
 *
 *  - the telemetry ring is always in strictly increasing timestamp order;
 *  - at most one instruction is active at a time;
 *  - the live (not yet passed) portion of the pending-target view is always
 *    a suffix of the chunk generation it displays;
 *  - nothing is ever sent except InstructionStart and Abort frames.
 */

import {
  Ack,
  BridgeMessage,
  FrameDecoder,
  Kind,
  LocalPose,
  Telemetry,
  UavState,
  encodeMessage,
} from "./codec.js";
import { composePose } from "./geometry.js";

/** A command refused before anything is sent (empty text, busy, offline). */
export class LocalRejection extends Error {
  constructor(message: string) {
    super(message);
    this.name = "LocalRejection";
  }
}

export interface TransportHooks {
  onOpen(): void;
  onBytes(data: Uint8Array): void;
  onClose(): void;
}

export interface Transport {
  send(frame: Uint8Array): void;
  close(): void;
}

export type TransportFactory = (address: string, hooks: TransportHooks) => Transport;

export type ConnectionState = "idle" | "connecting" | "open" | "reconnecting" | "closed";

export type InstructionPhase = "sent" | "active" | "aborting";

export interface ActiveInstruction {
  readonly id: string;
  readonly text: string;
  /** True when this session issued the instruction (vs another operator). */
  readonly mine: boolean;
  readonly phase: InstructionPhase;
}

export interface LogEntry {
  readonly wallMs: number;
  readonly line: string;
}

/** One scheduled waypoint of the displayed chunk generation, world frame. */
export interface PendingTarget {
  /** Scheduled arrival on the bridge clock. */
  readonly eta: number;
  readonly pose: LocalPose;
  /** Already behind the vehicle clock: drawn in the pruned style. */
  readonly passed: boolean;
}

export interface SessionOptions {
  /** Wall clock in ms; tests substitute a fake. */
  now?: () => number;
  setTimer?: (fn: () => void, ms: number) => unknown;
  clearTimer?: (handle: unknown) => void;
  /** Telemetry ring capacity; 600 states is about 2 min at 5 Hz. */
  telemetryCapacity?: number;
  logCapacity?: number;
}

const TELEMETRY_CAPACITY = 600;
const LOG_CAPACITY = 200;
/** Reconnect backoff: 0.5 s doubling to a 5 s ceiling. */
const BACKOFF_BASE_MS = 500;
const BACKOFF_CAP_MS = 5000;
/** Eta comparisons tolerate the same slack the scheduler's pruning does. */
const ETA_EPS = 1e-9;

interface ChunkView {
  readonly generation: number;
  readonly targets: readonly { eta: number; pose: LocalPose }[];
}

let sessionCounter = 0;

export class ConsoleSession {
  private readonly factory: TransportFactory;
  private readonly now: () => number;
  private readonly setTimer: (fn: () => void, ms: number) => unknown;
  private readonly clearTimer: (handle: unknown) => void;
  private readonly telemetryCapacity: number;
  private readonly logCapacity: number;

  private transport: Transport | null = null;
  private decoder = new FrameDecoder();
  private retryHandle: unknown = null;
  private attempts = 0;
  private userClosed = false;
  private readonly sessionTag: string;
  private instructionSeq = 0;

  private _connection: ConnectionState = "idle";
  private _address: string | null = null;
  private readonly _telemetry: Telemetry[] = [];
  private _active: ActiveInstruction | null = null;
  private _chunk: ChunkView | null = null;
  private _generation = 0;
  private readonly _log: LogEntry[] = [];
  private _lastSeenWallMs: number | null = null;
  private _lastFrameRef: string | null = null;

  constructor(factory: TransportFactory, opts: SessionOptions = {}) {
    this.factory = factory;
    this.now = opts.now ?? (() => Date.now());
    this.setTimer = opts.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
    this.clearTimer = opts.clearTimer ?? ((h) => clearTimeout(h as never));
    this.telemetryCapacity = opts.telemetryCapacity ?? TELEMETRY_CAPACITY;
    this.logCapacity = opts.logCapacity ?? LOG_CAPACITY;
    sessionCounter += 1;
    this.sessionTag = `${sessionCounter.toString(36)}${Math.floor(Math.random() * 0xffff)
      .toString(16)
      .padStart(4, "0")}`;
  }

  // -- connection lifecycle --

  connect(address: string): void {
    if (this.transport !== null || this.retryHandle !== null) {
      throw new LocalRejection("session already connecting or connected");
    }
    this.userClosed = false;
    this._address = address;
    this.attempts = 0;
    this.openTransport();
  }

  close(): void {
    this.userClosed = true;
    if (this.retryHandle !== null) {
      this.clearTimer(this.retryHandle);
      this.retryHandle = null;
    }
    const t = this.transport;
    this.transport = null;
    this._connection = "closed";
    if (t !== null) {
      t.close();
    }
  }

  private openTransport(): void {
    const address = this._address;
    if (address === null || this.userClosed) {
      return;
    }
    this.retryHandle = null;
    this._connection = this.attempts === 0 ? "connecting" : "reconnecting";
    // A dropped connection may have died mid-frame; never carry partial
    // bytes across transports.
    this.decoder = new FrameDecoder();
    try {
      this.transport = this.factory(address, {
        onOpen: () => this.handleOpen(),
        onBytes: (data) => this.handleBytes(data),
        onClose: () => this.handleClose(),
      });
    } catch (e) {
      this.log(`connect failed: ${String(e)}`);
      this.scheduleRetry();
    }
  }

  private scheduleRetry(): void {
    if (this.userClosed || this.retryHandle !== null) {
      return;
    }
    this._connection = "reconnecting";
    const delay = Math.min(BACKOFF_BASE_MS * 2 ** this.attempts, BACKOFF_CAP_MS);
    this.attempts += 1;
    this.retryHandle = this.setTimer(() => this.openTransport(), delay);
  }

  handleOpen(): void {
    if (this.userClosed) {
      return;
    }
    this._connection = "open";
    this.attempts = 0;
    this.log(`connected to ${this._address}`);
  }

  handleClose(): void {
    this.transport = null;
    if (this.userClosed) {
      this._connection = "closed";
      return;
    }
    if (this._connection === "open") {
      this.log("connection lost");
    }
    // The active-instruction view is connection-scoped: terminal acks for it
    // may have been missed while offline, so holding input disabled could
    // deadlock.  The server's busy rejection corrects any optimism.
    this._active = null;
    this.scheduleRetry();
  }

  handleBytes(data: Uint8Array): void {
    this._lastSeenWallMs = this.now();
    let messages: BridgeMessage[];
    try {
      messages = this.decoder.feed(data);
    } catch (e) {
      // The stream is corrupt; drop the connection and reconnect clean.
      this.log(`stream error: ${String(e)}`);
      const t = this.transport;
      this.transport = null;
      if (t !== null) {
        t.close();
      }
      this.scheduleRetry();
      return;
    }
    for (const m of messages) {
      this.applyMessage(m);
    }
  }

  // -- operator commands --

  sendInstruction(text: string): string {
    if (text.trim().length === 0) {
      throw new LocalRejection("empty instruction");
    }
    if (this._active !== null) {
      throw new LocalRejection(`instruction ${this._active.id} still active`);
    }
    if (this._connection !== "open" || this.transport === null) {
      throw new LocalRejection("not connected");
    }
    this.instructionSeq += 1;
    const id = `op-${this.sessionTag}-${this.instructionSeq}`;
    this.transport.send(
      encodeMessage({ kind: Kind.InstructionStart, id, text }),
    );
    this._active = { id, text, mine: true, phase: "sent" };
    this.log(`sent instruction ${id}: ${text}`);
    return id;
  }

  abort(): void {
    const active = this._active;
    if (active === null) {
      throw new LocalRejection("no active instruction");
    }
    if (this._connection !== "open" || this.transport === null) {
      throw new LocalRejection("not connected");
    }
    this.transport.send(encodeMessage({ kind: Kind.Abort, id: active.id }));
    this._active = { ...active, phase: "aborting" };
    this.log(`sent abort for ${active.id}`);
  }

  // -- message application --

  private applyMessage(m: BridgeMessage): void {
    switch (m.kind) {
      case Kind.Telemetry:
        this.applyTelemetry(m);
        break;
      case Kind.FrameMeta:
        this._lastFrameRef = m.obsRef;
        break;
      case Kind.InstructionStart:
        this.applyInstructionStart(m.id, m.text);
        break;
      case Kind.ChunkCmd: {
        this._generation += 1;
        const anchor = m.chunk.anchor;
        this._chunk = {
          generation: this._generation,
          targets: m.chunk.targets.map((offset, k) => ({
            eta: m.chunk.tInf + (k + 1) * m.chunk.stepDt,
            pose: composePose(anchor.pose, offset),
          })),
        };
        break;
      }
      case Kind.Ack:
        this.applyAck(m);
        break;
      case Kind.Abort:
        // Another operator's abort; the outcome arrives as an Ack.
        this.log(`abort requested for ${m.id}`);
        break;
      case Kind.RemoteQuery:
        this.log("unexpected policy traffic on console stream");
        break;
    }
  }

  private applyTelemetry(m: Telemetry): void {
    const last = this._telemetry[this._telemetry.length - 1];
    if (last !== undefined && m.t <= last.t) {
      const first = this._telemetry[0];
      if (first !== undefined && m.t < first.t) {
        // Clock moved backwards past everything we hold: the server was
        // restarted.  Start a fresh history rather than discarding forever.
        this._telemetry.length = 0;
      } else {
        return; // stale duplicate; keep the ring in timestamp order
      }
    }
    this._telemetry.push(m);
    if (this._telemetry.length > this.telemetryCapacity) {
      this._telemetry.shift();
    }
  }

  private applyInstructionStart(id: string, text: string): void {
    const active = this._active;
    if (active !== null && active.id === id) {
      // The bridge echoes the instruction once the runner starts.
      this._active = { ...active, phase: "active" };
      return;
    }
    if (active === null) {
      // Another operator's instruction; display it as the active one.
      this._active = { id, text, mine: false, phase: "active" };
      this.log(`instruction ${id} started: ${text}`);
    }
  }

  private applyAck(m: Ack): void {
    const [status, id, ...rest] = m.ref.split(":");
    const reason = rest.join(":");
    const active = this._active;
    const matches = active !== null && active.id === id;
    switch (status) {
      case "accepted":
        if (active !== null && matches) {
          this._active = { ...active, phase: "active" };
        }
        this.log(`accepted ${id}`);
        break;
      case "done":
      case "aborted":
        if (matches) {
          this._active = null;
          this._chunk = null;
        }
        this.log(`${status} ${id}`);
        break;
      case "rejected":
        if (active !== null && matches && active.mine) {
          this._active = null;
        }
        this.log(`rejected ${id}: ${reason}`);
        break;
      default:
        this.log(`ack ${m.ref}`);
        break;
    }
  }

  private log(line: string): void {
    this._log.push({ wallMs: this.now(), line });
    if (this._log.length > this.logCapacity) {
      this._log.shift();
    }
  }

  // -- projections --

  get connection(): ConnectionState {
    return this._connection;
  }

  get address(): string | null {
    return this._address;
  }

  /** Telemetry in strictly increasing timestamp order, oldest first. */
  get telemetry(): readonly Telemetry[] {
    return this._telemetry;
  }

  get latestState(): UavState | null {
    const last = this._telemetry[this._telemetry.length - 1];
    return last === undefined ? null : last.state;
  }

  get lastTelemetryT(): number | null {
    const last = this._telemetry[this._telemetry.length - 1];
    return last === undefined ? null : last.t;
  }

  get active(): ActiveInstruction | null {
    return this._active;
  }

  /** True when the operator may type a new instruction. */
  get inputEnabled(): boolean {
    return this._connection === "open" && this._active === null;
  }

  /**
   * The displayed chunk generation with pruned-vs-live classification.  The
   * entries whose `passed` flag is false are exactly the targets still ahead
   * of the vehicle clock — always a suffix, because etas increase with index.
   */
  get pendingTargets(): readonly PendingTarget[] {
    const chunk = this._chunk;
    if (chunk === null) {
      return [];
    }
    const nowT = this.lastTelemetryT;
    return chunk.targets.map((entry) => ({
      eta: entry.eta,
      pose: entry.pose,
      passed: nowT !== null && entry.eta <= nowT + ETA_EPS,
    }));
  }

  /** Monotone counter identifying the displayed chunk generation. */
  get targetGeneration(): number {
    return this._chunk === null ? 0 : this._chunk.generation;
  }

  get logEntries(): readonly LogEntry[] {
    return this._log;
  }

  get lastSeenWallMs(): number | null {
    return this._lastSeenWallMs;
  }

  get lastFrameRef(): string | null {
    return this._lastFrameRef;
  }
}
