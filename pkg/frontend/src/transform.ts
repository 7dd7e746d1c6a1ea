/** World <-> screen view transform: pan, zoom, fit.
 *
 * World is y-up meters; screen is y-down pixels. A rotation of 90 degrees in
 * the world therefore points "up" on screen.
 */

export interface ViewTransform {
  scale: number; // px per meter
  offsetX: number; // screen x of world origin
  offsetY: number; // screen y of world origin
}

export function worldToScreen(v: ViewTransform, wx: number, wy: number): [number, number] {
  return [v.offsetX + wx * v.scale, v.offsetY - wy * v.scale];
}

export function screenToWorld(v: ViewTransform, sx: number, sy: number): [number, number] {
  return [(sx - v.offsetX) / v.scale, (v.offsetY - sy) / v.scale];
}

export function panBy(v: ViewTransform, dxPx: number, dyPx: number): ViewTransform {
  return { ...v, offsetX: v.offsetX + dxPx, offsetY: v.offsetY + dyPx };
}

/** Zoom by `factor` keeping the world point under (sx, sy) fixed on screen. */
export function zoomAt(v: ViewTransform, sx: number, sy: number, factor: number): ViewTransform {
  const [wx, wy] = screenToWorld(v, sx, sy);
  const scale = Math.min(2000, Math.max(1, v.scale * factor));
  return {
    scale,
    offsetX: sx - wx * scale,
    offsetY: sy + wy * scale,
  };
}

export function fitBounds(
  bounds: [number, number, number, number],
  canvasW: number,
  canvasH: number,
  marginPx = 24,
): ViewTransform {
  const [minX, minY, maxX, maxY] = bounds;
  const w = Math.max(maxX - minX, 1e-6);
  const h = Math.max(maxY - minY, 1e-6);
  const scale = Math.min(
    (canvasW - 2 * marginPx) / w,
    (canvasH - 2 * marginPx) / h,
  );
  // center the bounds; world y grows upward
  const offsetX = (canvasW - (minX + maxX) * scale) / 2;
  const offsetY = (canvasH + (minY + maxY) * scale) / 2;
  return { scale, offsetX, offsetY };
}
