// Rolling-series charts on a bare canvas; gap points break the polyline.

import type { SeriesPoint } from "./state.js";

export interface Scaled {
  x: number;
  y: number;
  gap: boolean;
}

/** Map points into pixel space; y grows downward. */
export function scalePoints(
  points: SeriesPoint[],
  width: number,
  height: number,
  lo: number,
  hi: number,
): Scaled[] {
  if (points.length === 0) return [];
  const t0 = points[0].t;
  const t1 = points[points.length - 1].t;
  const span = Math.max(1, t1 - t0);
  const range = Math.max(1e-9, hi - lo);
  return points.map((p) => ({
    x: ((p.t - t0) / span) * (width - 8) + 4,
    y: height - 4 - ((Math.min(hi, Math.max(lo, p.v)) - lo) / range) * (height - 8),
    gap: p.gap,
  }));
}

export function drawSeries(
  canvas: HTMLCanvasElement,
  points: SeriesPoint[],
  lo: number,
  hi: number,
  color: string,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const scaled = scalePoints(points, canvas.width, canvas.height, lo, hi);
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  let penDown = false;
  for (const p of scaled) {
    if (p.gap) penDown = false; // visible discontinuity after dropped events
    if (penDown) {
      ctx.lineTo(p.x, p.y);
    } else {
      ctx.moveTo(p.x, p.y);
      penDown = true;
    }
  }
  ctx.stroke();
  ctx.fillStyle = color;
  for (const p of scaled.filter((q) => q.gap)) {
    ctx.fillRect(p.x - 1.5, p.y - 1.5, 3, 3);
  }
}
