/**
 * Browser wiring: a WebSocket transport feeding one event queue, a single
 * requestAnimationFrame loop that drains the queue into the session and
 * repaints, and the operator controls (connect, instruction, abort).
 */

import { ConsoleSession, LocalRejection, TransportFactory } from "./session.js";
import {
  AltitudeView,
  TopDownView,
  altitudeView,
  bannerText,
  statusText,
  topDownView,
} from "./render.js";

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (found === null) {
    throw new Error(`missing element #${id}`);
  }
  return found as T;
}

const addressInput = el<HTMLInputElement>("address");
const connectButton = el<HTMLButtonElement>("connect");
const banner = el<HTMLDivElement>("banner");
const topdownCanvas = el<HTMLCanvasElement>("topdown");
const altitudeCanvas = el<HTMLCanvasElement>("altitude");
const statusBar = el<HTMLDivElement>("status");
const logList = el<HTMLUListElement>("log");
const instructionForm = el<HTMLFormElement>("instruction-form");
const instructionInput = el<HTMLInputElement>("instruction");
const sendButton = el<HTMLButtonElement>("send");
const abortButton = el<HTMLButtonElement>("abort");

/**
 * Every transport event is appended here and consumed, in order, by the one
 * render loop below; session state never changes outside that loop or a
 * user-initiated command handler.
 */
const events: Array<() => void> = [];

const wsFactory: TransportFactory = (address, hooks) => {
  const ws = new WebSocket(`ws://${address}/`);
  ws.binaryType = "arraybuffer";
  ws.onopen = () => events.push(() => hooks.onOpen());
  ws.onmessage = (ev: MessageEvent) => {
    const bytes = new Uint8Array(ev.data as ArrayBuffer);
    events.push(() => hooks.onBytes(bytes));
  };
  ws.onclose = () => events.push(() => hooks.onClose());
  return {
    send: (frame) => ws.send(frame),
    close: () => ws.close(),
  };
};

let session = new ConsoleSession(wsFactory);

connectButton.onclick = () => {
  session.close();
  session = new ConsoleSession(wsFactory);
  session.connect(addressInput.value.trim());
};

instructionForm.onsubmit = (ev) => {
  ev.preventDefault();
  try {
    session.sendInstruction(instructionInput.value);
    instructionInput.value = "";
  } catch (e) {
    if (e instanceof LocalRejection) {
      flashStatus(e.message);
    } else {
      throw e;
    }
  }
};

abortButton.onclick = () => {
  try {
    session.abort();
  } catch (e) {
    if (e instanceof LocalRejection) {
      flashStatus(e.message);
    } else {
      throw e;
    }
  }
};

let flash: { text: string; untilMs: number } | null = null;

function flashStatus(text: string): void {
  flash = { text, untilMs: Date.now() + 3000 };
}

// -- painting --

function prepare(canvas: HTMLCanvasElement): CanvasRenderingContext2D {
  const dpr = window.devicePixelRatio || 1;
  const w = canvas.clientWidth;
  const h = canvas.clientHeight;
  if (canvas.width !== Math.round(w * dpr) || canvas.height !== Math.round(h * dpr)) {
    canvas.width = Math.round(w * dpr);
    canvas.height = Math.round(h * dpr);
  }
  const ctx = canvas.getContext("2d");
  if (ctx === null) {
    throw new Error("canvas 2d context unavailable");
  }
  ctx.setTransform(dpr, 0, 0, dpr, 0, 0);
  ctx.clearRect(0, 0, w, h);
  return ctx;
}

function paintTopDown(ctx: CanvasRenderingContext2D, view: TopDownView): void {
  ctx.lineWidth = 1.5;
  ctx.strokeStyle = "#4ec9b0";
  if (view.path.length > 1) {
    ctx.beginPath();
    const first = view.path[0]!;
    ctx.moveTo(first.x, first.y);
    for (const p of view.path) {
      ctx.lineTo(p.x, p.y);
    }
    ctx.stroke();
  }
  for (const target of view.targets) {
    ctx.beginPath();
    ctx.arc(target.px.x, target.px.y, 4, 0, 2 * Math.PI);
    if (target.passed) {
      ctx.strokeStyle = "#666666";
      ctx.stroke();
    } else {
      ctx.fillStyle = "#d7ba7d";
      ctx.fill();
    }
  }
  const vehicle = view.vehicle;
  if (vehicle !== null) {
    ctx.beginPath();
    ctx.arc(vehicle.px.x, vehicle.px.y, 5, 0, 2 * Math.PI);
    ctx.fillStyle = "#569cd6";
    ctx.fill();
    ctx.beginPath();
    ctx.moveTo(vehicle.px.x, vehicle.px.y);
    ctx.lineTo(vehicle.nose.x, vehicle.nose.y);
    ctx.strokeStyle = "#569cd6";
    ctx.lineWidth = 2;
    ctx.stroke();
  }
}

function paintAltitude(ctx: CanvasRenderingContext2D, view: AltitudeView): void {
  if (view.line.length > 1) {
    ctx.beginPath();
    const first = view.line[0]!;
    ctx.moveTo(first.x, first.y);
    for (const p of view.line) {
      ctx.lineTo(p.x, p.y);
    }
    ctx.strokeStyle = "#c586c0";
    ctx.lineWidth = 1.5;
    ctx.stroke();
  }
  ctx.fillStyle = "#888888";
  ctx.font = "11px sans-serif";
  ctx.fillText(`z ${view.zMin.toFixed(1)}–${view.zMax.toFixed(1)} m`, 6, 14);
}

let renderedLogLength = 0;

function paintLog(): void {
  const entries = session.logEntries;
  if (entries.length === renderedLogLength && logList.childElementCount > 0) {
    return;
  }
  renderedLogLength = entries.length;
  logList.replaceChildren(
    ...entries
      .slice(-40)
      .reverse()
      .map((entry) => {
        const item = document.createElement("li");
        item.textContent = `${new Date(entry.wallMs).toLocaleTimeString()} ${entry.line}`;
        return item;
      }),
  );
}

function renderLoop(): void {
  while (events.length > 0) {
    events.shift()!();
  }

  const text = bannerText(
    session.connection,
    session.address,
    session.lastSeenWallMs,
    session.lastTelemetryT,
    Date.now(),
  );
  banner.textContent = text ?? "";
  banner.style.display = text === null ? "none" : "block";

  const vp = {
    width: topdownCanvas.clientWidth,
    height: topdownCanvas.clientHeight,
    margin: 24,
  };
  paintTopDown(prepare(topdownCanvas), topDownView(session.telemetry, session.pendingTargets, vp));
  paintAltitude(
    prepare(altitudeCanvas),
    altitudeView(session.telemetry, {
      width: altitudeCanvas.clientWidth,
      height: altitudeCanvas.clientHeight,
      margin: 16,
    }),
  );

  const pending = session.pendingTargets;
  const live = pending.filter((t) => !t.passed).length;
  let status = statusText(
    session.latestState,
    session.lastFrameRef,
    live,
    pending.length - live,
  );
  const active = session.active;
  if (active !== null) {
    status += ` · ${active.phase}: ${active.text}`;
  }
  if (flash !== null) {
    if (Date.now() < flash.untilMs) {
      status = `${flash.text} · ${status}`;
    } else {
      flash = null;
    }
  }
  statusBar.textContent = status;

  sendButton.disabled = !session.inputEnabled;
  instructionInput.disabled = !session.inputEnabled;
  abortButton.disabled = session.active === null || session.connection !== "open";

  paintLog();
  requestAnimationFrame(renderLoop);
}

addressInput.value = `${window.location.hostname || "127.0.0.1"}:8765`;
requestAnimationFrame(renderLoop);
