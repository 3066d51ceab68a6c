// Overlay painting, kept as pure buffer math so tests run without a DOM.
// The friend console paints the full phone view (content unclipped); the
// wearer console paints only what the glasses can show: content clipped to
// the centered viewport, whose outline the DOM layer strokes on top.

import type { CatalogItem, ConsoleState, FrameView, ProjectionView } from "./state.js";

export interface Rect {
  x: number;
  y: number;
  width: number;
  height: number;
}

function roundHalfUp(v: number): number {
  return Math.floor(v + 0.5);
}

export function viewportRect(fraction: number, width: number, height: number): Rect {
  const vw = Math.max(1, roundHalfUp(fraction * width));
  const vh = Math.max(1, roundHalfUp(fraction * height));
  return {
    x: roundHalfUp((width - vw) / 2),
    y: roundHalfUp((height - vh) / 2),
    width: vw,
    height: vh,
  };
}

export function contentRect(
  projection: ProjectionView,
  item: CatalogItem | undefined,
  width: number,
  height: number,
): Rect {
  const [w, h] = item ? item.footprint : [0.2, 0.2];
  const ax = Math.min(Math.max(projection.anchorX, w), 1 - w);
  const ay = Math.min(Math.max(projection.anchorY, h), 1 - h);
  const x0 = roundHalfUp((ax - w) * width);
  const x1 = roundHalfUp((ax + w) * width);
  const y0 = roundHalfUp((ay - h) * height);
  const y1 = roundHalfUp((ay + h) * height);
  return { x: x0, y: y0, width: x1 - x0, height: y1 - y0 };
}

function intersect(a: Rect, b: Rect): Rect {
  const x0 = Math.max(a.x, b.x);
  const y0 = Math.max(a.y, b.y);
  const x1 = Math.min(a.x + a.width, b.x + b.width);
  const y1 = Math.min(a.y + a.height, b.y + b.height);
  return { x: x0, y: y0, width: Math.max(0, x1 - x0), height: Math.max(0, y1 - y0) };
}

function fill(buffer: Uint8Array, width: number, rect: Rect, value: number): void {
  for (let y = rect.y; y < rect.y + rect.height; y++) {
    buffer.fill(value, y * width + rect.x, y * width + rect.x + rect.width);
  }
}

// Grayscale view of one console: the latest frame with the active content
// footprint painted white. Friend view is the full phone view; wearer view
// clips content to the glasses viewport.
export function renderView(state: ConsoleState): { buffer: Uint8Array; width: number; height: number } | null {
  const frame: FrameView | null = state.lastFrame;
  if (frame === null) return null;
  const buffer = new Uint8Array(frame.pixels);
  if (state.projection) {
    const item = state.catalog.find((c) => c.id === state.projection?.contentId);
    let rect = contentRect(state.projection, item, frame.width, frame.height);
    if (state.role === "wearer") {
      rect = intersect(rect, viewportRect(state.glassesFraction, frame.width, frame.height));
    }
    fill(buffer, frame.width, rect, 255);
  }
  return { buffer, width: frame.width, height: frame.height };
}

export function grayToRgba(buffer: Uint8Array): Uint8ClampedArray<ArrayBuffer> {
  const rgba = new Uint8ClampedArray(buffer.length * 4);
  for (let i = 0; i < buffer.length; i++) {
    rgba[4 * i] = rgba[4 * i + 1] = rgba[4 * i + 2] = buffer[i];
    rgba[4 * i + 3] = 255;
  }
  return rgba;
}
