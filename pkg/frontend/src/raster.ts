/**
 * Polygon rasterization without a canvas, so masks can be produced (and
 * tested) in any runtime. Pixels are filled when their center lies inside
 * the polygon (even-odd rule); the outline and the vertices themselves are
 * then stamped so thin or degenerate shapes still leave their trace.
 */

import type { Box } from "./types.js";

export interface MaskImage {
  width: number;
  height: number;
  /** Row-major, one byte per pixel, 0 or 255. */
  data: Uint8Array;
}

export type Point = readonly [number, number];

export function emptyMask(width: number, height: number): MaskImage {
  return { width, height, data: new Uint8Array(width * height) };
}

function plot(mask: MaskImage, x: number, y: number): void {
  if (x >= 0 && x < mask.width && y >= 0 && y < mask.height) {
    mask.data[y * mask.width + x] = 255;
  }
}

/** Fill pixels whose centers fall inside the polygon, even-odd rule. */
function scanlineFill(mask: MaskImage, polygon: readonly Point[]): void {
  const n = polygon.length;
  for (let y = 0; y < mask.height; y++) {
    const cy = y + 0.5;
    const crossings: number[] = [];
    for (let i = 0; i < n; i++) {
      const [x0, y0] = polygon[i];
      const [x1, y1] = polygon[(i + 1) % n];
      if (y0 === y1) continue;
      // half-open span per edge so shared vertices count once
      if (cy >= Math.min(y0, y1) && cy < Math.max(y0, y1)) {
        crossings.push(x0 + ((cy - y0) * (x1 - x0)) / (y1 - y0));
      }
    }
    crossings.sort((a, b) => a - b);
    for (let j = 0; j + 1 < crossings.length; j += 2) {
      const left = Math.max(0, Math.ceil(crossings[j] - 0.5));
      const right = Math.min(mask.width - 1, Math.ceil(crossings[j + 1] - 0.5) - 1);
      for (let x = left; x <= right; x++) {
        mask.data[y * mask.width + x] = 255;
      }
    }
  }
}

function strokeLine(mask: MaskImage, a: Point, b: Point): void {
  let x0 = Math.floor(a[0]);
  let y0 = Math.floor(a[1]);
  const x1 = Math.floor(b[0]);
  const y1 = Math.floor(b[1]);
  const dx = Math.abs(x1 - x0);
  const dy = -Math.abs(y1 - y0);
  const sx = x0 < x1 ? 1 : -1;
  const sy = y0 < y1 ? 1 : -1;
  let err = dx + dy;
  for (;;) {
    plot(mask, x0, y0);
    if (x0 === x1 && y0 === y1) break;
    const e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

const clamp = (v: number, lo: number, hi: number) =>
  Math.min(hi, Math.max(lo, v));

/**
 * Rasterize a polygon to a binary mask of the given size. Vertices may lie
 * outside the image; the part of the shape that overlaps the image is
 * kept, and out-of-image vertices stamp their nearest border pixel so the
 * vertex-containment property holds everywhere.
 */
export function rasterizePolygon(
  polygon: readonly Point[],
  width: number,
  height: number,
): MaskImage {
  const mask = emptyMask(width, height);
  if (polygon.length === 0 || width <= 0 || height <= 0) return mask;
  scanlineFill(mask, polygon);
  for (let i = 0; i < polygon.length; i++) {
    strokeLine(mask, polygon[i], polygon[(i + 1) % polygon.length]);
  }
  for (const [x, y] of polygon) {
    plot(
      mask,
      clamp(Math.floor(x), 0, width - 1),
      clamp(Math.floor(y), 0, height - 1),
    );
  }
  return mask;
}

/** True when the pixel under the point (clamped into the image) is set. */
export function maskContains(mask: MaskImage, x: number, y: number): boolean {
  const px = clamp(Math.floor(x), 0, mask.width - 1);
  const py = clamp(Math.floor(y), 0, mask.height - 1);
  return mask.data[py * mask.width + px] !== 0;
}

export function maskArea(mask: MaskImage): number {
  let n = 0;
  for (const v of mask.data) if (v !== 0) n++;
  return n;
}

/** Axis-aligned bounding box of the polygon, [x0, y0, x1, y1]. */
export function polygonBounds(polygon: readonly Point[]): Box {
  let x0 = Infinity;
  let y0 = Infinity;
  let x1 = -Infinity;
  let y1 = -Infinity;
  for (const [x, y] of polygon) {
    x0 = Math.min(x0, x);
    y0 = Math.min(y0, y);
    x1 = Math.max(x1, x);
    y1 = Math.max(y1, y);
  }
  return [x0, y0, x1, y1];
}
