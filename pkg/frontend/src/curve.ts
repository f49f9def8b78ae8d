// Reward-curve rendering as an inline SVG polyline (no chart dependency).

import type { CurvePoint } from "./api.js";

export interface CurveGeometry {
  path: string;
  yMin: number;
  yMax: number;
}

export function curvePath(
  points: CurvePoint[],
  width: number,
  height: number,
  pad = 4,
): CurveGeometry | null {
  if (points.length === 0) return null;
  const xs = points.map((p) => p.episode);
  const ys = points.map((p) => p.total_reward);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMin = Math.min(...ys);
  const yMax = Math.max(...ys);
  const xSpan = xMax - xMin || 1;
  const ySpan = yMax - yMin || 1;
  const toX = (x: number) => pad + ((x - xMin) / xSpan) * (width - 2 * pad);
  const toY = (y: number) => height - pad - ((y - yMin) / ySpan) * (height - 2 * pad);
  const path = points
    .map((p, i) => `${i === 0 ? "M" : "L"}${toX(p.episode).toFixed(1)},${toY(p.total_reward).toFixed(1)}`)
    .join(" ");
  return { path, yMin, yMax };
}
