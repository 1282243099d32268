// View transform between image coordinates and canvas pixels.
// The whole scene uses one mapping: screen = zoom * (coord - pan).

export interface Transform {
  zoom: number;
  panX: number;
  panY: number;
}

export interface Point {
  x: number;
  y: number;
}

export interface Rect {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

export const MIN_ZOOM = 0.05;
export const MAX_ZOOM = 40;

export function toScreen(t: Transform, x: number, y: number): Point {
  return { x: t.zoom * (x - t.panX), y: t.zoom * (y - t.panY) };
}

export function toImage(t: Transform, sx: number, sy: number): Point {
  return { x: sx / t.zoom + t.panX, y: sy / t.zoom + t.panY };
}

/** Rescale around a screen anchor so the image point under it stays put. */
export function zoomAt(t: Transform, sx: number, sy: number, factor: number): Transform {
  const zoom = Math.min(MAX_ZOOM, Math.max(MIN_ZOOM, t.zoom * factor));
  const anchor = toImage(t, sx, sy);
  return {
    zoom,
    panX: anchor.x - sx / zoom,
    panY: anchor.y - sy / zoom,
  };
}

export function panBy(t: Transform, dxScreen: number, dyScreen: number): Transform {
  return { zoom: t.zoom, panX: t.panX - dxScreen / t.zoom, panY: t.panY - dyScreen / t.zoom };
}

/** Initial transform: image centered in the viewport with a small margin. */
export function fitImage(
  imageW: number,
  imageH: number,
  viewW: number,
  viewH: number,
): Transform {
  const zoom = Math.min(MAX_ZOOM, 0.95 * Math.min(viewW / imageW, viewH / imageH));
  return {
    zoom,
    panX: (imageW - viewW / zoom) / 2,
    panY: (imageH - viewH / zoom) / 2,
  };
}

function clampValue(v: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, v));
}

/**
 * Normalize corner order and force the rectangle inside the image.
 * The result always satisfies 0 <= x1 < x2 <= width (same for y), with
 * at least minSize pixels of extent, so no drag can produce a
 * degenerate or out-of-canvas box.
 */
export function clampRect(r: Rect, width: number, height: number, minSize = 1): Rect {
  let x1 = Math.min(r.x1, r.x2);
  let x2 = Math.max(r.x1, r.x2);
  let y1 = Math.min(r.y1, r.y2);
  let y2 = Math.max(r.y1, r.y2);
  x1 = clampValue(x1, 0, width - minSize);
  y1 = clampValue(y1, 0, height - minSize);
  x2 = clampValue(x2, x1 + minSize, width);
  y2 = clampValue(y2, y1 + minSize, height);
  return { x1, y1, x2, y2 };
}

/** Shift a rectangle, stopping at the image border instead of crossing it. */
export function shiftRectInside(
  r: Rect,
  dx: number,
  dy: number,
  width: number,
  height: number,
): Rect {
  const fx = clampValue(dx, -r.x1, width - r.x2);
  const fy = clampValue(dy, -r.y1, height - r.y2);
  return { x1: r.x1 + fx, y1: r.y1 + fy, x2: r.x2 + fx, y2: r.y2 + fy };
}
