/** Wire format spoken by the simulator's teleop server.
 *
 * The server is authoritative: clients render whatever state arrives last
 * and never simulate on their own. Scan entries are ranges divided by the
 * scanner's max range, so 1.0 means "no hit".
 */

export interface StateMsg {
  type: "state";
  tick: number;
  pose: [number, number, number]; // x (m), y (m), heading (rad)
  vel: [number, number]; // v (m/s), omega (rad/s)
  scan: number[]; // normalized ranges in (0, 1], head-major order
  status: string;
  recording: boolean;
}

export interface SavedMsg {
  type: "saved";
  path: string;
  steps: number;
}

export interface Drive {
  v: number;
  w: number;
}

export type RecordAction = "start" | "stop" | "save" | "discard";

/** Platform defaults mirrored from the simulator's configuration; every one
 * can be overridden through URL query parameters. */
export const DEFAULTS = {
  vMax: 1.0, // m/s
  wMax: 2.0, // rad/s
  raysPerHead: 17,
  maxRange: 3.0, // m
  tickHz: 20,
  scale: 60, // canvas pixels per meter
};

export function isStateMsg(x: unknown): x is StateMsg {
  const m = x as StateMsg;
  return (
    typeof m === "object" &&
    m !== null &&
    m.type === "state" &&
    typeof m.tick === "number" &&
    Array.isArray(m.pose) &&
    m.pose.length === 3 &&
    m.pose.every((v) => typeof v === "number" && Number.isFinite(v)) &&
    Array.isArray(m.vel) &&
    m.vel.length === 2 &&
    Array.isArray(m.scan) &&
    typeof m.recording === "boolean"
  );
}

export function isSavedMsg(x: unknown): x is SavedMsg {
  const m = x as SavedMsg;
  return (
    typeof m === "object" &&
    m !== null &&
    m.type === "saved" &&
    typeof m.path === "string" &&
    typeof m.steps === "number"
  );
}

export function cmdMsg(drive: Drive, seq: number): string {
  return JSON.stringify({ type: "cmd", v: drive.v, w: drive.w, seq });
}

export function recordMsg(action: RecordAction): string {
  return JSON.stringify({ type: "record", action });
}

export function resetMsg(scenario: string): string {
  return JSON.stringify({ type: "reset", scenario });
}
