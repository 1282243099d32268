import { describe, expect, it } from "vitest";
import {
  clampRect,
  fitImage,
  MAX_ZOOM,
  MIN_ZOOM,
  panBy,
  shiftRectInside,
  toImage,
  toScreen,
  zoomAt,
  type Transform,
} from "../src/transform.js";

describe("toScreen", () => {
  it("applies screen = zoom * (coord - pan) on both axes", () => {
    const t: Transform = { zoom: 2.5, panX: 40, panY: -12 };
    for (const [x, y] of [
      [0, 0],
      [40, -12],
      [123.25, 77.5],
      [-300, 928],
    ]) {
      const p = toScreen(t, x, y);
      expect(p.x).toBeCloseTo(t.zoom * (x - t.panX), 12);
      expect(p.y).toBeCloseTo(t.zoom * (y - t.panY), 12);
    }
  });

  it("is inverted exactly by toImage", () => {
    const t: Transform = { zoom: 0.37, panX: -1500.5, panY: 233 };
    for (let i = 0; i < 50; i++) {
      const x = (i * 97.3) % 4096;
      const y = (i * 31.7) % 2048;
      const back = toImage(t, toScreen(t, x, y).x, toScreen(t, x, y).y);
      expect(back.x).toBeCloseTo(x, 9);
      expect(back.y).toBeCloseTo(y, 9);
    }
  });
});

describe("zoomAt", () => {
  it("keeps the anchor point fixed on screen", () => {
    let t: Transform = { zoom: 1, panX: 0, panY: 0 };
    const anchor = toImage(t, 310, 95);
    for (const factor of [1.15, 1.15, 3, 0.5, 0.2]) {
      t = zoomAt(t, 310, 95, factor);
      const p = toScreen(t, anchor.x, anchor.y);
      expect(p.x).toBeCloseTo(310, 9);
      expect(p.y).toBeCloseTo(95, 9);
    }
  });

  it("clamps zoom to the allowed range", () => {
    const t: Transform = { zoom: 1, panX: 0, panY: 0 };
    expect(zoomAt(t, 0, 0, 1e9).zoom).toBe(MAX_ZOOM);
    expect(zoomAt(t, 0, 0, 1e-9).zoom).toBe(MIN_ZOOM);
  });

  it("compounds multiplicatively", () => {
    let t: Transform = { zoom: 1, panX: 10, panY: 10 };
    t = zoomAt(t, 50, 50, 2);
    t = zoomAt(t, 50, 50, 2);
    expect(t.zoom).toBeCloseTo(4, 12);
  });
});

describe("panBy", () => {
  it("moves content with the pointer in screen pixels", () => {
    const t: Transform = { zoom: 4, panX: 100, panY: 100 };
    const before = toScreen(t, 150, 150);
    const after = toScreen(panBy(t, 80, -20), 150, 150);
    expect(after.x - before.x).toBeCloseTo(80, 9);
    expect(after.y - before.y).toBeCloseTo(-20, 9);
  });
});

describe("fitImage", () => {
  it("centers the image inside the viewport", () => {
    const t = fitImage(640, 480, 1280, 800);
    const tl = toScreen(t, 0, 0);
    const br = toScreen(t, 640, 480);
    expect(tl.x).toBeCloseTo(1280 - br.x, 6);
    expect(tl.y).toBeCloseTo(800 - br.y, 6);
    expect(br.x - tl.x).toBeLessThanOrEqual(1280);
    expect(br.y - tl.y).toBeLessThanOrEqual(800);
  });

  it("fits the limiting dimension for wide and tall images", () => {
    const wide = fitImage(4000, 100, 1000, 1000);
    expect(wide.zoom).toBeCloseTo(0.95 * (1000 / 4000), 9);
    const tall = fitImage(100, 4000, 1000, 1000);
    expect(tall.zoom).toBeCloseTo(0.95 * (1000 / 4000), 9);
  });
});

describe("clampRect", () => {
  it("normalizes swapped corners", () => {
    const r = clampRect({ x1: 80, y1: 90, x2: 20, y2: 30 }, 640, 640);
    expect(r).toEqual({ x1: 20, y1: 30, x2: 80, y2: 90 });
  });

  it("clamps to the image bounds", () => {
    const r = clampRect({ x1: -50, y1: -10, x2: 700, y2: 655 }, 640, 640);
    expect(r.x1).toBe(0);
    expect(r.y1).toBe(0);
    expect(r.x2).toBe(640);
    expect(r.y2).toBe(640);
  });

  it("never yields x2 <= x1 or y2 <= y1, even for degenerate input", () => {
    for (const raw of [
      { x1: 10, y1: 10, x2: 10, y2: 10 },
      { x1: 640, y1: 640, x2: 700, y2: 700 },
      { x1: -5, y1: -5, x2: -1, y2: -1 },
      { x1: 639.9, y1: 0, x2: 639.95, y2: 0.01 },
    ]) {
      const r = clampRect(raw, 640, 640);
      expect(r.x2).toBeGreaterThan(r.x1);
      expect(r.y2).toBeGreaterThan(r.y1);
      expect(r.x1).toBeGreaterThanOrEqual(0);
      expect(r.y1).toBeGreaterThanOrEqual(0);
      expect(r.x2).toBeLessThanOrEqual(640);
      expect(r.y2).toBeLessThanOrEqual(640);
    }
  });
});

describe("shiftRectInside", () => {
  it("applies an unconstrained shift verbatim", () => {
    const r = shiftRectInside({ x1: 100, y1: 100, x2: 200, y2: 200 }, 15, -30, 640, 640);
    expect(r).toEqual({ x1: 115, y1: 70, x2: 215, y2: 170 });
  });

  it("stops at the image border without shrinking the box", () => {
    const r = shiftRectInside({ x1: 100, y1: 100, x2: 200, y2: 200 }, -500, 9000, 640, 640);
    expect(r.x1).toBe(0);
    expect(r.x2).toBe(100);
    expect(r.y2).toBe(640);
    expect(r.y1).toBe(540);
    expect(r.x2 - r.x1).toBe(100);
    expect(r.y2 - r.y1).toBe(100);
  });
});
