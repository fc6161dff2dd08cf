/** World-to-canvas mapping: meters to pixels with the y axis flipped so +y
 * points up on screen. The camera is a center point plus a uniform scale. */

export interface Camera {
  cx: number; // world x at the canvas center (m)
  cy: number; // world y at the canvas center (m)
  scale: number; // pixels per meter
  width: number; // canvas size (px)
  height: number;
}

export function worldToCanvas(cam: Camera, x: number, y: number): [number, number] {
  return [cam.width / 2 + (x - cam.cx) * cam.scale, cam.height / 2 - (y - cam.cy) * cam.scale];
}

/** Pixel distance between two world points; handy for scale checks. */
export function pixelDistance(cam: Camera, a: [number, number], b: [number, number]): number {
  const [ax, ay] = worldToCanvas(cam, a[0], a[1]);
  const [bx, by] = worldToCanvas(cam, b[0], b[1]);
  return Math.hypot(bx - ax, by - ay);
}
