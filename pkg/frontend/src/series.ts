/** Pure transforms from API payloads to chartable series. Keeping them
 * out of the DOM code lets the data-equality tests compare payloads to
 * rendered points directly.
 */

import type { CurvePoint, EvaluationRow } from "./types.js";

export interface XY {
  x: number;
  y: number;
}

export type CurveField = "avg_return" | "avg_cost";

/** One training curve as (epoch, field) pairs, in payload order. */
export function curveSeries(points: CurvePoint[], field: CurveField): XY[] {
  return points.map((p) => ({ x: p.epoch, y: p[field] }));
}

/** Running best fitness over the evaluation rows, in payload order;
 * rows with no fitness are carried over, leading ones are dropped. */
export function fitnessTrail(rows: EvaluationRow[]): XY[] {
  const out: XY[] = [];
  let best: number | null = null;
  rows.forEach((row, index) => {
    if (row.fitness !== null && (best === null || row.fitness > best)) {
      best = row.fitness;
    }
    if (best !== null) out.push({ x: index, y: best });
  });
  return out;
}

export function isNondecreasing(values: number[]): boolean {
  for (let i = 1; i < values.length; i++) {
    if (values[i] < values[i - 1]) return false;
  }
  return true;
}

export interface Viewport {
  width: number;
  height: number;
  pad: number;
}

export interface Scaled {
  points: { x: number; y: number; source: XY }[];
  polyline: string;
}

/** Scale a series into pixel space, y up. A flat series is centered.
 * `domain` sets the value range; pass the union of all series drawn on
 * one chart so they share a scale. It defaults to the series itself. */
export function scaleSeries(
  series: XY[],
  view: Viewport,
  domain: XY[] = series,
): Scaled {
  if (series.length === 0) return { points: [], polyline: "" };
  const extent = domain.length > 0 ? domain : series;
  const xs = extent.map((p) => p.x);
  const ys = extent.map((p) => p.y);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMin = Math.min(...ys);
  const yMax = Math.max(...ys);
  const innerW = view.width - 2 * view.pad;
  const innerH = view.height - 2 * view.pad;
  const sx = (x: number) =>
    xMax === xMin
      ? view.width / 2
      : view.pad + ((x - xMin) / (xMax - xMin)) * innerW;
  const sy = (y: number) =>
    yMax === yMin
      ? view.height / 2
      : view.pad + (1 - (y - yMin) / (yMax - yMin)) * innerH;
  const points = series.map((p) => ({ x: sx(p.x), y: sy(p.y), source: p }));
  const polyline = points
    .map((p) => `${round2(p.x)},${round2(p.y)}`)
    .join(" ");
  return { points, polyline };
}

function round2(v: number): number {
  return Math.round(v * 100) / 100;
}
