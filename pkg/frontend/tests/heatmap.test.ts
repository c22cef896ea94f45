import { describe, expect, it } from "vitest";
import { divergingColor } from "../src/color.js";
import { renderHeatmap } from "../src/heatmap.js";
import type { HeatmapPayload } from "../src/types.js";

function payload(): HeatmapPayload {
  return {
    candidate_id: "i00-c00",
    x_min: 0,
    x_max: 3,
    y_min: 0,
    y_max: 3,
    resolution: 3,
    values: [
      [-2, 0, 2],
      [0, 1, 0],
      [1, 1, 1],
    ],
    hazards: [{ x: 1, y: 1, radius: 0.5 }],
    goal: { x: 2, y: 2, radius: 1 },
  };
}

describe("renderHeatmap", () => {
  it("draws one cell per grid value", () => {
    const svg = renderHeatmap(payload());
    expect(svg.querySelectorAll("rect").length).toBe(9);
    expect(svg.getAttribute("class")).toBe("heatmap");
    expect(svg.getAttribute("width")).toBe("18");
    expect(svg.getAttribute("height")).toBe("18");
  });

  it("colors cells on the symmetric diverging scale", () => {
    const svg = renderHeatmap(payload());
    const rects = svg.querySelectorAll("rect");
    // grid maximum magnitude is 2, so these are the exact endpoints
    expect(rects[0].getAttribute("fill")).toBe(divergingColor(-2, 2));
    expect(rects[0].getAttribute("fill")).toBe("rgb(178, 24, 43)");
    expect(rects[1].getAttribute("fill")).toBe("rgb(247, 247, 247)");
    expect(rects[2].getAttribute("fill")).toBe("rgb(33, 102, 172)");
    expect(rects[4].getAttribute("fill")).toBe(divergingColor(1, 2));
  });

  it("places row zero at the bottom", () => {
    const svg = renderHeatmap(payload());
    const rects = svg.querySelectorAll("rect");
    // first payload row is the lowest y band, so the highest svg y
    expect(rects[0].getAttribute("x")).toBe("0");
    expect(rects[0].getAttribute("y")).toBe("12");
    expect(rects[1].getAttribute("x")).toBe("6");
    expect(rects[1].getAttribute("y")).toBe("12");
    // last payload row sits at the top of the image
    expect(rects[6].getAttribute("y")).toBe("0");
  });

  it("keeps the raw value on each cell", () => {
    const svg = renderHeatmap(payload());
    const rects = svg.querySelectorAll("rect");
    expect(rects[0].getAttribute("data-value")).toBe("-2");
    expect(rects[4].getAttribute("data-value")).toBe("1");
  });

  it("overlays hazard and goal circles in world coordinates", () => {
    const svg = renderHeatmap(payload());
    const hazards = svg.querySelectorAll("circle.hazard");
    const goals = svg.querySelectorAll("circle.goal");
    expect(hazards.length).toBe(1);
    expect(goals.length).toBe(1);
    // world (1, 1) in a 3-wide arena drawn at 18px: x = 6, y flipped = 12
    expect(hazards[0].getAttribute("cx")).toBe("6");
    expect(hazards[0].getAttribute("cy")).toBe("12");
    expect(hazards[0].getAttribute("r")).toBe("3");
    expect(goals[0].getAttribute("cx")).toBe("12");
    expect(goals[0].getAttribute("cy")).toBe("6");
    expect(goals[0].getAttribute("r")).toBe("6");
  });

  it("honors a custom cell size", () => {
    const svg = renderHeatmap(payload(), 10);
    expect(svg.getAttribute("width")).toBe("30");
    const rects = svg.querySelectorAll("rect");
    expect(rects[1].getAttribute("x")).toBe("10");
    expect(rects[1].getAttribute("y")).toBe("20");
  });
});
