import { describe, expect, it } from "vitest";

import {
  fitBounds,
  panBy,
  screenToWorld,
  worldToScreen,
  zoomAt,
  type ViewTransform,
} from "../src/transform.js";

const view: ViewTransform = { scale: 50, offsetX: 100, offsetY: 400 };

describe("view transform", () => {
  it("round-trips world and screen coordinates", () => {
    for (const [wx, wy] of [[0, 0], [3.5, -2.1], [-7, 12.25]] as const) {
      const [sx, sy] = worldToScreen(view, wx, wy);
      const [bx, by] = screenToWorld(view, sx, sy);
      expect(bx).toBeCloseTo(wx, 10);
      expect(by).toBeCloseTo(wy, 10);
    }
  });

  it("is y-up: increasing world y decreases screen y", () => {
    const [, low] = worldToScreen(view, 0, 0);
    const [, high] = worldToScreen(view, 0, 2);
    expect(high).toBeLessThan(low);
  });

  it("pan-zoom round trip leaves world coordinates unchanged", () => {
    let v = view;
    v = panBy(v, 37, -12);
    v = zoomAt(v, 250, 180, 1.6);
    v = zoomAt(v, 250, 180, 1 / 1.6);
    v = panBy(v, -37, 12);
    const [sx, sy] = worldToScreen(v, 1.5, 2.5);
    const [ox, oy] = worldToScreen(view, 1.5, 2.5);
    expect(sx).toBeCloseTo(ox, 6);
    expect(sy).toBeCloseTo(oy, 6);
  });

  it("zoomAt keeps the anchored world point fixed on screen", () => {
    const anchor: [number, number] = [222, 333];
    const [wx, wy] = screenToWorld(view, ...anchor);
    const zoomed = zoomAt(view, anchor[0], anchor[1], 2.0);
    const [sx, sy] = worldToScreen(zoomed, wx, wy);
    expect(sx).toBeCloseTo(anchor[0], 8);
    expect(sy).toBeCloseTo(anchor[1], 8);
    expect(zoomed.scale).toBeCloseTo(100);
  });

  it("fitBounds places the bounds inside the canvas with margin", () => {
    const v = fitBounds([0, 0, 6, 4], 800, 600, 20);
    const corners: [number, number][] = [[0, 0], [6, 0], [6, 4], [0, 4]];
    for (const [wx, wy] of corners) {
      const [sx, sy] = worldToScreen(v, wx, wy);
      expect(sx).toBeGreaterThanOrEqual(19);
      expect(sx).toBeLessThanOrEqual(781);
      expect(sy).toBeGreaterThanOrEqual(19);
      expect(sy).toBeLessThanOrEqual(581);
    }
    // centered
    const [cx, cy] = worldToScreen(v, 3, 2);
    expect(cx).toBeCloseTo(400, 6);
    expect(cy).toBeCloseTo(300, 6);
  });
});
