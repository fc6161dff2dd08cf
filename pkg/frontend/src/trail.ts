/** Recent robot poses, rendered as the on-screen trajectory. */

export interface TrailPoint {
  x: number;
  y: number;
}

export class Trail {
  private buf: TrailPoint[] = [];

  constructor(readonly cap: number) {
    if (cap < 2) throw new Error(`trail needs capacity >= 2, got ${cap}`);
  }

  push(x: number, y: number): void {
    this.buf.push({ x, y });
    if (this.buf.length > this.cap) this.buf.shift();
  }

  clear(): void {
    this.buf = [];
  }

  get points(): readonly TrailPoint[] {
    return this.buf;
  }
}
