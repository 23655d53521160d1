/**
 * View geometry for the console, kept free of canvas and DOM so it is
 * testable under node: world-to-pixel fitting, the top-down scene, the
 * altitude strip, and the operator-facing status strings.  Screen axes are
 * the usual canvas convention (x right, y down); the local frame is ENU
 * (x east, y north, yaw counterclockwise from east), so projection flips y.
 */

import type { Telemetry, UavState } from "./codec.js";
import type { ConnectionState, PendingTarget } from "./session.js";

export interface XY {
  readonly x: number;
  readonly y: number;
}

export interface Viewport {
  readonly width: number;
  readonly height: number;
  readonly margin: number;
}

export interface FitTransform {
  readonly scale: number; // px per meter
  readonly originX: number;
  readonly originY: number;
}

/** Never zoom tighter than this, so a hovering vehicle stays legible. */
const MAX_SCALE_PX_PER_M = 40;
/** Treat the world extent as at least this wide to avoid degenerate fits. */
const MIN_SPAN_M = 2;

export function fitTransform(points: readonly XY[], vp: Viewport): FitTransform {
  const availW = Math.max(vp.width - 2 * vp.margin, 1);
  const availH = Math.max(vp.height - 2 * vp.margin, 1);
  if (points.length === 0) {
    return { scale: 1, originX: vp.width / 2, originY: vp.height / 2 };
  }
  let minX = Infinity;
  let maxX = -Infinity;
  let minY = Infinity;
  let maxY = -Infinity;
  for (const p of points) {
    if (p.x < minX) minX = p.x;
    if (p.x > maxX) maxX = p.x;
    if (p.y < minY) minY = p.y;
    if (p.y > maxY) maxY = p.y;
  }
  const spanX = Math.max(maxX - minX, MIN_SPAN_M);
  const spanY = Math.max(maxY - minY, MIN_SPAN_M);
  const scale = Math.min(availW / spanX, availH / spanY, MAX_SCALE_PX_PER_M);
  const cx = (minX + maxX) / 2;
  const cy = (minY + maxY) / 2;
  return {
    scale,
    originX: vp.width / 2 - scale * cx,
    originY: vp.height / 2 + scale * cy,
  };
}

export function project(t: FitTransform, p: XY): XY {
  return { x: t.originX + t.scale * p.x, y: t.originY - t.scale * p.y };
}

export interface VehicleMark {
  readonly px: XY;
  /** Tip of the heading ray, in pixels. */
  readonly nose: XY;
  readonly yaw: number;
}

export interface TargetMark {
  readonly px: XY;
  readonly eta: number;
  readonly passed: boolean;
}

export interface TopDownView {
  readonly transform: FitTransform;
  readonly path: readonly XY[];
  readonly vehicle: VehicleMark | null;
  readonly targets: readonly TargetMark[];
}

const NOSE_LEN_PX = 14;

/**
 * Lay out the top-down view: the flown path, the vehicle marker with its
 * heading ray, and the displayed chunk's targets (live and passed alike; the
 * painter styles them differently).  The fit covers everything drawn.
 */
export function topDownView(
  telemetry: readonly Telemetry[],
  targets: readonly PendingTarget[],
  vp: Viewport,
): TopDownView {
  const world: XY[] = telemetry.map((m) => ({ x: m.state.pose.x, y: m.state.pose.y }));
  for (const target of targets) {
    world.push({ x: target.pose.x, y: target.pose.y });
  }
  const transform = fitTransform(world, vp);
  const path = telemetry.map((m) =>
    project(transform, { x: m.state.pose.x, y: m.state.pose.y }),
  );
  let vehicle: VehicleMark | null = null;
  const last = telemetry[telemetry.length - 1];
  if (last !== undefined) {
    const px = project(transform, { x: last.state.pose.x, y: last.state.pose.y });
    const yaw = last.state.pose.yaw;
    vehicle = {
      px,
      yaw,
      nose: {
        x: px.x + NOSE_LEN_PX * Math.cos(yaw),
        y: px.y - NOSE_LEN_PX * Math.sin(yaw),
      },
    };
  }
  const targetMarks = targets.map((target) => ({
    px: project(transform, { x: target.pose.x, y: target.pose.y }),
    eta: target.eta,
    passed: target.passed,
  }));
  return { transform, path, vehicle, targets: targetMarks };
}

export interface AltitudeView {
  readonly line: readonly XY[];
  readonly tMin: number;
  readonly tMax: number;
  readonly zMin: number;
  readonly zMax: number;
}

/** Altitude strip: time left to right, higher altitude toward the top. */
export function altitudeView(telemetry: readonly Telemetry[], vp: Viewport): AltitudeView {
  if (telemetry.length === 0) {
    return { line: [], tMin: 0, tMax: 0, zMin: 0, zMax: 0 };
  }
  const first = telemetry[0]!;
  let tMin = first.t;
  let tMax = first.t;
  let zMin = first.state.pose.z;
  let zMax = first.state.pose.z;
  for (const m of telemetry) {
    if (m.t < tMin) tMin = m.t;
    if (m.t > tMax) tMax = m.t;
    if (m.state.pose.z < zMin) zMin = m.state.pose.z;
    if (m.state.pose.z > zMax) zMax = m.state.pose.z;
  }
  const spanT = Math.max(tMax - tMin, 1);
  const spanZ = Math.max(zMax - zMin, 1);
  const availW = Math.max(vp.width - 2 * vp.margin, 1);
  const availH = Math.max(vp.height - 2 * vp.margin, 1);
  const line = telemetry.map((m) => ({
    x: vp.margin + ((m.t - tMin) / spanT) * availW,
    y: vp.margin + ((zMax - m.state.pose.z) / spanZ) * availH,
  }));
  return { line, tMin, tMax, zMin, zMax };
}

/** Connection banner, or null when the stream is healthy. */
export function bannerText(
  connection: ConnectionState,
  address: string | null,
  lastSeenWallMs: number | null,
  lastTelemetryT: number | null,
  nowMs: number,
): string | null {
  switch (connection) {
    case "open":
      return null;
    case "idle":
      return "not connected";
    case "connecting":
      return `connecting to ${address ?? "?"} …`;
    case "closed":
      return "disconnected";
    case "reconnecting": {
      let seen: string;
      if (lastSeenWallMs === null) {
        seen = "no data received yet";
      } else {
        const age = Math.max(0, (nowMs - lastSeenWallMs) / 1000);
        seen = `last seen ${age.toFixed(1)} s ago`;
        if (lastTelemetryT !== null) {
          seen += ` at sim t ${lastTelemetryT.toFixed(1)} s`;
        }
      }
      return `connection lost — retrying … (${seen})`;
    }
  }
}

/** One-line vehicle readout for the status bar. */
export function statusText(
  state: UavState | null,
  frameRef: string | null,
  liveTargets: number,
  passedTargets: number,
): string {
  if (state === null) {
    return "no telemetry yet";
  }
  const p = state.pose;
  const deg = ((p.yaw * 180) / Math.PI).toFixed(0);
  let line =
    `t ${state.t.toFixed(1)} s · x ${p.x.toFixed(1)} m · y ${p.y.toFixed(1)} m · ` +
    `z ${p.z.toFixed(1)} m · yaw ${deg}°`;
  if (liveTargets > 0 || passedTargets > 0) {
    line += ` · targets ${liveTargets} live / ${passedTargets} passed`;
  }
  if (frameRef !== null) {
    line += ` · frame ${frameRef}`;
  }
  return line;
}
