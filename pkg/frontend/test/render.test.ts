import { describe, expect, it } from "vitest";

import { contentRect, renderView, viewportRect } from "../src/render.js";
import { CatalogItem, ConsoleState, initialState } from "../src/state.js";

const SNOW: CatalogItem = { id: "snow", name: "Snow", kind: "particle", anchor: [0.5, 0.5], footprint: [0.5, 0.5] };
const BIRD: CatalogItem = { id: "bird", name: "Bird", kind: "object", anchor: [0.5, 0.5], footprint: [0.2, 0.2] };

function withFrame(role: "wearer" | "friend", overrides: Partial<ConsoleState> = {}): ConsoleState {
  return {
    ...initialState(role),
    catalog: [SNOW, BIRD],
    glassesFraction: 0.5,
    lastFrame: { width: 20, height: 20, pixels: new Uint8Array(400), blurApplied: 0, capturedAt: 0 },
    ...overrides,
  };
}

describe("viewport geometry", () => {
  it("full fraction hugs the canvas edge", () => {
    expect(viewportRect(1.0, 320, 240)).toEqual({ x: 0, y: 0, width: 320, height: 240 });
  });

  it("half fraction is the centered half-size rectangle", () => {
    expect(viewportRect(0.5, 100, 100)).toEqual({ x: 25, y: 25, width: 50, height: 50 });
  });

  it("rounds half-up like the relay and never collapses below 1 px", () => {
    expect(viewportRect(0.5, 3, 3)).toEqual({ x: 1, y: 1, width: 2, height: 2 });
    expect(viewportRect(0.05, 4, 4).width).toBe(1);
  });
});

describe("overlay rendering", () => {
  it("no active content paints the bare frame", () => {
    const view = renderView(withFrame("friend"))!;
    expect(view.buffer).toEqual(new Uint8Array(400));
  });

  it("particle covers the friend view fully but only the viewport for the wearer", () => {
    const projection = { contentId: "snow", anchorX: 0.5, anchorY: 0.5 };
    const friendView = renderView(withFrame("friend", { projection }))!;
    expect(friendView.buffer.every((v) => v === 255)).toBe(true);

    const wearerView = renderView(withFrame("wearer", { projection }))!;
    const vp = viewportRect(0.5, 20, 20);
    for (let y = 0; y < 20; y++) {
      for (let x = 0; x < 20; x++) {
        const inside = x >= vp.x && x < vp.x + vp.width && y >= vp.y && y < vp.y + vp.height;
        expect(wearerView.buffer[y * 20 + x]).toBe(inside ? 255 : 0);
      }
    }
  });

  it("object content clamps to the display before rasterizing", () => {
    const rect = contentRect({ contentId: "bird", anchorX: 0.95, anchorY: 0.5 }, BIRD, 100, 100);
    expect(rect).toEqual({ x: 60, y: 30, width: 40, height: 40 });
  });

  it("wearer view never paints outside the viewport", () => {
    const projection = { contentId: "bird", anchorX: 0.9, anchorY: 0.9 };
    const view = renderView(withFrame("wearer", { projection }))!;
    const vp = viewportRect(0.5, 20, 20);
    for (let y = 0; y < 20; y++) {
      for (let x = 0; x < 20; x++) {
        const inside = x >= vp.x && x < vp.x + vp.width && y >= vp.y && y < vp.y + vp.height;
        if (!inside) expect(view.buffer[y * 20 + x]).toBe(0);
      }
    }
  });

  it("returns null before any frame arrives", () => {
    expect(renderView(initialState("friend"))).toBeNull();
  });
});
