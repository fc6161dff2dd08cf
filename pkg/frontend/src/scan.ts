/** Client-side mirror of the scanner geometry: three heads (front, left,
 * right), each a symmetric fan, rays listed head-major with ascending offset.
 * Used to project normalized scan ranges back into world-frame hit points so
 * the crop rows build up on screen as the robot senses them.
 */

const HEADS: Array<{ mount: number; halfwidth: number }> = [
  { mount: 0.0, halfwidth: (30 * Math.PI) / 180 },
  { mount: Math.PI / 2, halfwidth: (45 * Math.PI) / 180 },
  { mount: -Math.PI / 2, halfwidth: (45 * Math.PI) / 180 },
];

/** Ray directions in the robot frame, matching the server's scan order. */
export function bodyAngles(raysPerHead: number): number[] {
  const out: number[] = [];
  for (const h of HEADS) {
    for (let i = 0; i < raysPerHead; i++) {
      const frac = raysPerHead === 1 ? 0.5 : i / (raysPerHead - 1);
      out.push(h.mount - h.halfwidth + 2 * h.halfwidth * frac);
    }
  }
  return out;
}

export interface ScanPoint {
  x: number;
  y: number;
}

/** World-frame endpoints of the rays that hit something (range < max). */
export function scanHits(
  pose: [number, number, number],
  scan: readonly number[],
  angles: readonly number[],
  maxRange: number,
): ScanPoint[] {
  const [px, py, theta] = pose;
  const pts: ScanPoint[] = [];
  for (let i = 0; i < scan.length && i < angles.length; i++) {
    if (scan[i] >= 0.999) continue; // normalized 1.0 means no return
    const r = scan[i] * maxRange;
    const a = theta + angles[i];
    pts.push({ x: px + r * Math.cos(a), y: py + r * Math.sin(a) });
  }
  return pts;
}

/** Fixed-capacity accumulator of scan hits; old points age out in FIFO
 * order so the visible rows track what the robot has recently sensed. */
export class HitCloud {
  private buf: ScanPoint[] = [];
  private next = 0;

  constructor(readonly cap: number) {}

  add(points: readonly ScanPoint[]): void {
    for (const p of points) {
      if (this.buf.length < this.cap) {
        this.buf.push(p);
      } else {
        this.buf[this.next] = p;
        this.next = (this.next + 1) % this.cap;
      }
    }
  }

  get points(): readonly ScanPoint[] {
    return this.buf;
  }

  clear(): void {
    this.buf = [];
    this.next = 0;
  }
}
