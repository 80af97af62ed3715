/**
 * Zoom/pan transform between image pixels and screen coordinates.
 *
 * Rendering maps image point p to screen as p * zoom + offset; the inverse
 * floors back to the integer pixel the cursor is over, so a click anywhere
 * inside a pixel's screen footprint resolves to that pixel regardless of
 * zoom level.
 */

export interface Viewport {
  zoom: number;
  offsetX: number;
  offsetY: number;
}

export interface Point {
  x: number;
  y: number;
}

export function makeViewport(zoom = 1, offsetX = 0, offsetY = 0): Viewport {
  if (!(zoom > 0)) throw new Error(`zoom must be positive, got ${zoom}`);
  return { zoom, offsetX, offsetY };
}

/** Screen position of an image point (its top-left corner for integers). */
export function imageToScreen(view: Viewport, p: Point): Point {
  return { x: p.x * view.zoom + view.offsetX, y: p.y * view.zoom + view.offsetY };
}

/** Continuous image coordinates under a screen position. */
export function screenToImage(view: Viewport, s: Point): Point {
  return { x: (s.x - view.offsetX) / view.zoom, y: (s.y - view.offsetY) / view.zoom };
}

/** Integer image pixel under a screen position (exact inverse of rendering). */
export function screenToImagePixel(view: Viewport, s: Point): Point {
  const p = screenToImage(view, s);
  return { x: Math.floor(p.x), y: Math.floor(p.y) };
}

/** Rescale around a screen anchor so the image point under it stays put. */
export function zoomAt(view: Viewport, factor: number, anchor: Point): Viewport {
  const zoom = view.zoom * factor;
  if (!(zoom > 0)) throw new Error("zoom must stay positive");
  return {
    zoom,
    offsetX: anchor.x - (anchor.x - view.offsetX) * factor,
    offsetY: anchor.y - (anchor.y - view.offsetY) * factor,
  };
}

export function pan(view: Viewport, dx: number, dy: number): Viewport {
  return { zoom: view.zoom, offsetX: view.offsetX + dx, offsetY: view.offsetY + dy };
}

/** Clamp an image pixel into bounds; returns null when it falls outside. */
export function clampToImage(p: Point, width: number, height: number): Point | null {
  if (p.x < 0 || p.y < 0 || p.x >= width || p.y >= height) return null;
  return p;
}
