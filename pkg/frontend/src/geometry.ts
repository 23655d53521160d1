/**
 * Local-frame pose arithmetic shared by the session (target projection) and
 * the renderer.  Matches the ground-station conventions: ENU axes, radians,
 * body-frame xy offsets rotated by anchor yaw only.
 */

import type { LocalPose } from "./codec.js";

const TWO_PI = 2 * Math.PI;

/** Reduce an angle to (-pi, pi]; exactly -pi maps to +pi. */
export function wrapAngle(a: number): number {
  if (!Number.isFinite(a)) {
    throw new RangeError(`angle is not finite: ${a}`);
  }
  let r = a % TWO_PI;
  if (r <= -Math.PI) {
    r += TWO_PI;
  } else if (r > Math.PI) {
    r -= TWO_PI;
  }
  return r;
}

/**
 * Apply a body-frame offset to an anchor pose.  The xy offset is rotated by
 * the anchor yaw only; z translates directly; attitude offsets compose
 * additively with wrapping.
 */
export function composePose(anchor: LocalPose, offset: LocalPose): LocalPose {
  const c = Math.cos(anchor.yaw);
  const s = Math.sin(anchor.yaw);
  return {
    x: anchor.x + c * offset.x - s * offset.y,
    y: anchor.y + s * offset.x + c * offset.y,
    z: anchor.z + offset.z,
    roll: wrapAngle(anchor.roll + offset.roll),
    pitch: wrapAngle(anchor.pitch + offset.pitch),
    yaw: wrapAngle(anchor.yaw + offset.yaw),
  };
}
