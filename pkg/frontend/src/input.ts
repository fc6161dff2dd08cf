/** Keyboard and gamepad state mapped to velocity commands in physical units.
 *
 * No smoothing, no client-side rate limiting: the raw human command stream is
 * the training signal, so the robot's own acceleration limits are the only
 * filter. Released inputs map to explicit zeros.
 */

import { Drive } from "./protocol.js";

export interface Limits {
  vMax: number;
  wMax: number;
}

export const GAMEPAD_DEADZONE = 0.12;

export function clampDrive(d: Drive, lim: Limits): Drive {
  return {
    v: Math.min(lim.vMax, Math.max(-lim.vMax, d.v)),
    w: Math.min(lim.wMax, Math.max(-lim.wMax, d.w)),
  };
}

/** Arrow keys or WASD; opposing keys cancel. Left turn is positive omega. */
export function keysToDrive(keys: ReadonlySet<string>, lim: Limits): Drive {
  const fwd = keys.has("ArrowUp") || keys.has("KeyW") ? 1 : 0;
  const back = keys.has("ArrowDown") || keys.has("KeyS") ? 1 : 0;
  const left = keys.has("ArrowLeft") || keys.has("KeyA") ? 1 : 0;
  const right = keys.has("ArrowRight") || keys.has("KeyD") ? 1 : 0;
  return { v: (fwd - back) * lim.vMax, w: (left - right) * lim.wMax };
}

/** Standard-mapping stick axes: axis 1 is forward (up = -1), axis 0 is
 * lateral (left = -1, which should turn left, i.e. positive omega). */
export function axesToDrive(axes: readonly number[], lim: Limits, dead = GAMEPAD_DEADZONE): Drive {
  const a0 = axes.length > 0 && Math.abs(axes[0]) > dead ? axes[0] : 0;
  const a1 = axes.length > 1 && Math.abs(axes[1]) > dead ? axes[1] : 0;
  const unsign = (x: number) => (x === 0 ? 0 : x); // no -0 on the wire
  return { v: unsign(-a1 * lim.vMax), w: unsign(-a0 * lim.wMax) };
}

export function gamepadActive(axes: readonly number[], dead = GAMEPAD_DEADZONE): boolean {
  return axes.some((a) => Math.abs(a) > dead);
}

/** Gamepad wins while any axis is deflected; otherwise the keyboard drives. */
export function mergeDrive(
  keys: ReadonlySet<string>,
  axes: readonly number[],
  lim: Limits,
): Drive {
  const drive = gamepadActive(axes) ? axesToDrive(axes, lim) : keysToDrive(keys, lim);
  return clampDrive(drive, lim);
}
