/** Canvas drawing for the bird's-eye live view. Pure presentation: every
 * world quantity comes from the latest server state; nothing is predicted. */

import { Camera, worldToCanvas } from "./transform.js";
import { ScanPoint } from "./scan.js";
import { TrailPoint } from "./trail.js";
import { StateMsg } from "./protocol.js";
import { LinkStatus } from "./net.js";

export const ROBOT_RADIUS_M = 0.15;

export interface Scene {
  state: StateMsg | null;
  linkStatus: LinkStatus;
  hits: readonly ScanPoint[];
  trail: readonly TrailPoint[];
  angles: readonly number[]; // body-frame ray directions
  maxRange: number;
  latencyMs: number | null; // freshness of the newest state message
  savedNote: string | null; // transient "saved N steps" banner
}

export function drawScene(ctx: CanvasRenderingContext2D, cam: Camera, scene: Scene): void {
  ctx.fillStyle = "#10140f";
  ctx.fillRect(0, 0, cam.width, cam.height);
  drawGrid(ctx, cam);

  // accumulated scan returns: the crop rows as the robot has sensed them
  ctx.fillStyle = "#3fae4a";
  for (const p of scene.hits) {
    const [x, y] = worldToCanvas(cam, p.x, p.y);
    ctx.fillRect(x - 1.5, y - 1.5, 3, 3);
  }

  if (scene.trail.length >= 2) {
    ctx.strokeStyle = "#8a93a6";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    scene.trail.forEach((p, i) => {
      const [x, y] = worldToCanvas(cam, p.x, p.y);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
  }

  const st = scene.state;
  if (st) {
    drawRayFan(ctx, cam, st, scene.angles, scene.maxRange);
    drawRobot(ctx, cam, st);
  }
  drawHud(ctx, cam, scene);
}

function drawGrid(ctx: CanvasRenderingContext2D, cam: Camera): void {
  const halfW = cam.width / 2 / cam.scale;
  const halfH = cam.height / 2 / cam.scale;
  ctx.strokeStyle = "#1d2420";
  ctx.lineWidth = 1;
  ctx.beginPath();
  for (let gx = Math.floor(cam.cx - halfW); gx <= cam.cx + halfW; gx++) {
    const [x] = worldToCanvas(cam, gx, 0);
    ctx.moveTo(x, 0);
    ctx.lineTo(x, cam.height);
  }
  for (let gy = Math.floor(cam.cy - halfH); gy <= cam.cy + halfH; gy++) {
    const [, y] = worldToCanvas(cam, 0, gy);
    ctx.moveTo(0, y);
    ctx.lineTo(cam.width, y);
  }
  ctx.stroke();
}

function drawRayFan(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  st: StateMsg,
  angles: readonly number[],
  maxRange: number,
): void {
  const [px, py, theta] = st.pose;
  const [ox, oy] = worldToCanvas(cam, px, py);
  ctx.strokeStyle = "rgba(90, 160, 110, 0.18)";
  ctx.lineWidth = 1;
  ctx.beginPath();
  for (let i = 0; i < st.scan.length && i < angles.length; i++) {
    const r = st.scan[i] * maxRange;
    const a = theta + angles[i];
    const [ex, ey] = worldToCanvas(cam, px + r * Math.cos(a), py + r * Math.sin(a));
    ctx.moveTo(ox, oy);
    ctx.lineTo(ex, ey);
  }
  ctx.stroke();
}

function drawRobot(ctx: CanvasRenderingContext2D, cam: Camera, st: StateMsg): void {
  const [px, py, theta] = st.pose;
  const [x, y] = worldToCanvas(cam, px, py);
  const r = ROBOT_RADIUS_M * cam.scale;
  const collided = st.status !== "ok";
  ctx.fillStyle = collided ? "#d9534f" : "#e8b23a";
  ctx.beginPath();
  ctx.arc(x, y, r, 0, 2 * Math.PI);
  ctx.fill();
  // heading tick
  const [hx, hy] = worldToCanvas(
    cam,
    px + 2.2 * ROBOT_RADIUS_M * Math.cos(theta),
    py + 2.2 * ROBOT_RADIUS_M * Math.sin(theta),
  );
  ctx.strokeStyle = "#f5f0e6";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(x, y);
  ctx.lineTo(hx, hy);
  ctx.stroke();
}

function drawHud(ctx: CanvasRenderingContext2D, cam: Camera, scene: Scene): void {
  ctx.font = "13px system-ui, sans-serif";
  ctx.textBaseline = "top";
  const st = scene.state;
  const lines = [
    st
      ? `tick ${st.tick}   v ${st.vel[0].toFixed(2)} m/s   w ${st.vel[1].toFixed(2)} rad/s`
      : "waiting for state...",
    st ? `status ${st.status}` : "",
    scene.latencyMs !== null ? `state age ${scene.latencyMs.toFixed(0)} ms` : "",
  ].filter(Boolean);
  ctx.fillStyle = "#cfd6c9";
  lines.forEach((line, i) => ctx.fillText(line, 10, 10 + 17 * i));

  if (st?.recording) {
    ctx.fillStyle = "#d9534f";
    ctx.beginPath();
    ctx.arc(cam.width - 80, 18, 6, 0, 2 * Math.PI);
    ctx.fill();
    ctx.fillStyle = "#f5f0e6";
    ctx.fillText("REC", cam.width - 68, 11);
  }

  if (scene.savedNote) {
    ctx.fillStyle = "#9fd08a";
    ctx.fillText(scene.savedNote, 10, cam.height - 24);
  }

  if (scene.linkStatus !== "live") {
    ctx.fillStyle = "rgba(20, 20, 20, 0.75)";
    ctx.fillRect(0, cam.height / 2 - 24, cam.width, 48);
    ctx.fillStyle = "#f0d060";
    ctx.textAlign = "center";
    ctx.fillText(
      scene.linkStatus === "connecting"
        ? "connection lost - reconnecting (input disabled)"
        : "disconnected",
      cam.width / 2,
      cam.height / 2 - 7,
    );
    ctx.textAlign = "left";
  }
}
