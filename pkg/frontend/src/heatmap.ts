/** Cost-expression heatmap as inline SVG: one rect per grid cell on
 * the diverging scale, with the hazard and goal circles overlaid in
 * world coordinates. Row 0 of the payload is the lowest y, so rows are
 * flipped for screen space (SVG y grows downward).
 */

import { divergingColor, maxAbsOf } from "./color.js";
import type { Circle, HeatmapPayload } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export function renderHeatmap(
  payload: HeatmapPayload,
  cellPx = 6,
): SVGSVGElement {
  const n = payload.resolution;
  const size = n * cellPx;
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${size} ${size}`);
  svg.setAttribute("width", String(size));
  svg.setAttribute("height", String(size));
  svg.setAttribute("class", "heatmap");

  const maxAbs = maxAbsOf(payload.values);
  for (let i = 0; i < n; i++) {
    const row = payload.values[i];
    for (let j = 0; j < n; j++) {
      const rect = document.createElementNS(SVG_NS, "rect");
      rect.setAttribute("x", String(j * cellPx));
      rect.setAttribute("y", String((n - 1 - i) * cellPx));
      rect.setAttribute("width", String(cellPx));
      rect.setAttribute("height", String(cellPx));
      rect.setAttribute("fill", divergingColor(row[j], maxAbs));
      rect.setAttribute("data-value", String(row[j]));
      svg.appendChild(rect);
    }
  }

  const toPx = worldToPixel(payload, size);
  for (const hazard of payload.hazards) {
    svg.appendChild(circleAt(hazard, toPx, "hazard"));
  }
  svg.appendChild(circleAt(payload.goal, toPx, "goal"));
  return svg;
}

interface PixelMap {
  x(wx: number): number;
  y(wy: number): number;
  scale: number;
}

function worldToPixel(payload: HeatmapPayload, sizePx: number): PixelMap {
  const spanX = payload.x_max - payload.x_min;
  const spanY = payload.y_max - payload.y_min;
  return {
    x: (wx) => ((wx - payload.x_min) / spanX) * sizePx,
    y: (wy) => sizePx - ((wy - payload.y_min) / spanY) * sizePx,
    scale: sizePx / spanX,
  };
}

function circleAt(c: Circle, toPx: PixelMap, cls: string): SVGCircleElement {
  const el = document.createElementNS(SVG_NS, "circle");
  el.setAttribute("cx", String(toPx.x(c.x)));
  el.setAttribute("cy", String(toPx.y(c.y)));
  el.setAttribute("r", String(c.radius * toPx.scale));
  el.setAttribute("class", cls);
  return el;
}
