/** Entry point: wires the socket link, input sources, and canvas together.
 *
 * Query parameters:
 *   endpoint  websocket URL              (default: ws://<page host>/)
 *   scale     canvas pixels per meter    (default: 60)
 *   vmax      speed limit in m/s         (default: 1.0)
 *   wmax      turn-rate limit in rad/s   (default: 2.0)
 *   rays      rays per scanner head      (default: 17)
 *   range     scanner max range in m     (default: 3.0)
 */

import { DEFAULTS } from "./protocol.js";
import { TeleopLink } from "./net.js";
import { Camera } from "./transform.js";
import { mergeDrive } from "./input.js";
import { HitCloud, bodyAngles, scanHits } from "./scan.js";
import { Trail } from "./trail.js";
import { Scene, drawScene } from "./render.js";

function num(params: URLSearchParams, key: string, fallback: number): number {
  const raw = params.get(key);
  const val = raw === null ? NaN : Number(raw);
  return Number.isFinite(val) && val > 0 ? val : fallback;
}

function main(): void {
  const params = new URLSearchParams(window.location.search);
  const endpoint = params.get("endpoint") ?? `ws://${window.location.host}/`;
  const limits = {
    vMax: num(params, "vmax", DEFAULTS.vMax),
    wMax: num(params, "wmax", DEFAULTS.wMax),
  };
  const scale = num(params, "scale", DEFAULTS.scale);
  const raysPerHead = Math.round(num(params, "rays", DEFAULTS.raysPerHead));
  const maxRange = num(params, "range", DEFAULTS.maxRange);

  const canvas = document.getElementById("view") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const statusEl = document.getElementById("link-status")!;

  const angles = bodyAngles(raysPerHead);
  const hits = new HitCloud(4000);
  const trail = new Trail(600);
  let savedNote: string | null = null;
  let savedNoteUntil = 0;

  const link = new TeleopLink(endpoint);
  link.onstate = (st) => {
    trail.push(st.pose[0], st.pose[1]);
    hits.add(scanHits(st.pose, st.scan, angles, maxRange));
  };
  link.onsaved = (msg) => {
    savedNote = `saved ${msg.steps} steps -> ${msg.path}`;
    savedNoteUntil = Date.now() + 4000;
  };
  link.onstatus = (s) => {
    statusEl.textContent = s;
    statusEl.className = `status-${s}`;
  };
  link.connect();

  // ---- recording controls -------------------------------------------------
  const record = (action: "start" | "stop" | "save" | "discard") => () =>
    link.sendRecord(action);
  const HOTKEYS: Record<string, () => void> = {
    KeyR: record("start"),
    KeyT: record("stop"),
    KeyY: record("save"),
    KeyU: record("discard"),
  };
  for (const action of ["start", "stop", "save", "discard"] as const) {
    document.getElementById(`btn-${action}`)?.addEventListener("click", record(action));
  }
  document.getElementById("btn-reset")?.addEventListener("click", () => {
    const scenario = (document.getElementById("scenario") as HTMLInputElement).value.trim();
    hits.clear();
    trail.clear();
    link.sendReset(scenario || "0");
  });

  // ---- input: keyboard + gamepad, streamed at the server tick rate -------
  const keys = new Set<string>();
  window.addEventListener("keydown", (e) => {
    if (e.code in HOTKEYS) {
      HOTKEYS[e.code]();
      e.preventDefault();
      return;
    }
    keys.add(e.code);
    if (e.code.startsWith("Arrow")) e.preventDefault();
  });
  window.addEventListener("keyup", (e) => keys.delete(e.code));
  window.addEventListener("blur", () => keys.clear());

  function gamepadAxes(): readonly number[] {
    for (const pad of navigator.getGamepads?.() ?? []) {
      if (pad && pad.connected) return pad.axes;
    }
    return [];
  }

  setInterval(() => {
    if (!link.live) return; // input disabled while disconnected
    link.sendDrive(mergeDrive(keys, gamepadAxes(), limits));
  }, 1000 / DEFAULTS.tickHz);

  // ---- render loop: draw whatever state arrived last ----------------------
  function frame(): void {
    const st = link.lastState;
    const cam: Camera = {
      cx: st ? st.pose[0] : 0,
      cy: st ? st.pose[1] : 0,
      scale,
      width: canvas.width,
      height: canvas.height,
    };
    if (savedNote && Date.now() > savedNoteUntil) savedNote = null;
    const scene: Scene = {
      state: st,
      linkStatus: link.status,
      hits: hits.points,
      trail: trail.points,
      angles,
      maxRange,
      latencyMs: st ? Date.now() - link.lastStateAt : null,
      savedNote,
    };
    drawScene(ctx, cam, scene);
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
}

main();
