/** Top-down scene rendering and hit testing.
 *
 * Geometry (screen-space polygons for floor, object rectangles, and the agent
 * arrow) is computed by pure functions; canvas painting consumes exactly that
 * geometry, so the hit-test harness exercises the same shapes the user sees.
 */

import { worldToScreen, type ViewTransform } from "./transform.js";
import type { AgentPose, ObjectRect, TopdownPayload } from "./types.js";

export interface ScreenShape {
  id: number;
  label: string;
  corners: [number, number][]; // screen-space, CCW
  highlighted: boolean;
}

export function objectCornersWorld(obj: ObjectRect): [number, number][] {
  const yaw = (obj.yaw_deg * Math.PI) / 180;
  const c = Math.cos(yaw);
  const s = Math.sin(yaw);
  const hw = obj.w / 2;
  const hh = obj.h / 2;
  const local: [number, number][] = [
    [-hw, -hh],
    [hw, -hh],
    [hw, hh],
    [-hw, hh],
  ];
  return local.map(([x, y]) => [
    obj.cx + c * x - s * y,
    obj.cy + s * x + c * y,
  ]);
}

export function layoutObjects(
  payload: TopdownPayload,
  view: ViewTransform,
  highlightIds: number[] = payload.highlight_ids,
): ScreenShape[] {
  const highlighted = new Set(highlightIds);
  return payload.objects.map((obj) => ({
    id: obj.id,
    label: obj.label,
    corners: objectCornersWorld(obj).map(([x, y]) => worldToScreen(view, x, y)),
    highlighted: highlighted.has(obj.id),
  }));
}

export function floorScreenPolygon(
  payload: TopdownPayload,
  view: ViewTransform,
): [number, number][] {
  return payload.floor.polygon.map(([x, y]) => worldToScreen(view, x, y));
}

/** Arrow triangle for the agent pose: tip points along the heading. */
export function agentArrowWorld(agent: AgentPose, sizeM = 0.45): [number, number][] {
  const rot = (agent.rot_deg * Math.PI) / 180;
  const tip: [number, number] = [
    agent.x + Math.cos(rot) * sizeM,
    agent.y + Math.sin(rot) * sizeM,
  ];
  const left: [number, number] = [
    agent.x + Math.cos(rot + (3 * Math.PI) / 4) * sizeM * 0.7,
    agent.y + Math.sin(rot + (3 * Math.PI) / 4) * sizeM * 0.7,
  ];
  const right: [number, number] = [
    agent.x + Math.cos(rot - (3 * Math.PI) / 4) * sizeM * 0.7,
    agent.y + Math.sin(rot - (3 * Math.PI) / 4) * sizeM * 0.7,
  ];
  return [tip, left, right];
}

function pointInPolygon(pt: [number, number], polygon: [number, number][]): boolean {
  let inside = false;
  const [px, py] = pt;
  for (let i = 0, j = polygon.length - 1; i < polygon.length; j = i++) {
    const [xi, yi] = polygon[i]!;
    const [xj, yj] = polygon[j]!;
    if (yi > py !== yj > py && px < ((xj - xi) * (py - yi)) / (yj - yi) + xi) {
      inside = !inside;
    }
  }
  return inside;
}

/** Object under a screen point; later (higher-id) objects win ties. */
export function hitTest(
  payload: TopdownPayload,
  view: ViewTransform,
  sx: number,
  sy: number,
): number | null {
  const shapes = layoutObjects(payload, view);
  for (let i = shapes.length - 1; i >= 0; i--) {
    const shape = shapes[i]!;
    if (pointInPolygon([sx, sy], shape.corners)) {
      return shape.id;
    }
  }
  return null;
}

export interface DrawOptions {
  hoverId?: number | null;
}

export function draw(
  ctx: CanvasRenderingContext2D,
  payload: TopdownPayload,
  view: ViewTransform,
  opts: DrawOptions = {},
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#11151c";
  ctx.fillRect(0, 0, width, height);

  const floor = floorScreenPolygon(payload, view);
  ctx.beginPath();
  floor.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
  ctx.closePath();
  ctx.fillStyle = "#1d2430";
  ctx.fill();
  ctx.strokeStyle = "#3a4556";
  ctx.lineWidth = 1.5;
  ctx.stroke();

  for (const shape of layoutObjects(payload, view)) {
    ctx.beginPath();
    shape.corners.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
    ctx.closePath();
    ctx.fillStyle = shape.highlighted ? "rgba(255, 180, 60, 0.35)" : "rgba(90, 130, 190, 0.25)";
    ctx.fill();
    ctx.lineWidth = shape.highlighted ? 3 : 1;
    ctx.strokeStyle = shape.highlighted
      ? "#ffb43c"
      : shape.id === opts.hoverId
        ? "#9fc1ef"
        : "#5a82be";
    ctx.stroke();

    const cx = shape.corners.reduce((acc, c) => acc + c[0], 0) / shape.corners.length;
    const cy = shape.corners.reduce((acc, c) => acc + c[1], 0) / shape.corners.length;
    ctx.fillStyle = "#cfd8e3";
    ctx.font = "11px system-ui, sans-serif";
    ctx.textAlign = "center";
    ctx.fillText(`${shape.label}-${shape.id}`, cx, cy);
  }

  if (payload.agent) {
    const arrow = agentArrowWorld(payload.agent).map(([x, y]) => worldToScreen(view, x, y));
    ctx.beginPath();
    arrow.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
    ctx.closePath();
    ctx.fillStyle = "#4ade80";
    ctx.fill();
    ctx.strokeStyle = "#16a34a";
    ctx.stroke();
  }
}
