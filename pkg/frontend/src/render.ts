/** Canvas rendering: occupancy grid, zone overlays in the interface palette,
 * task markers, and path polylines. Pure drawing — every number comes from
 * the document or service payloads. */

import { Point, ZONE_COLORS, ZoneDraft } from "./model.js";
import { PathView } from "./controller.js";

export interface MapGeometry {
  grid: string[];
  cellSizeM: number;
  pixelsPerMeter: number;
}

export function canvasSize(geometry: MapGeometry): [number, number] {
  const rows = geometry.grid.length;
  const cols = rows ? geometry.grid[0]!.length : 0;
  const scale = geometry.pixelsPerMeter * geometry.cellSizeM;
  return [cols * scale, rows * scale];
}

function toPixels(geometry: MapGeometry, [x, y]: Point): [number, number] {
  return [x * geometry.pixelsPerMeter, y * geometry.pixelsPerMeter];
}

export function cellCenter(geometry: MapGeometry, row: number, col: number): Point {
  const s = geometry.cellSizeM;
  return [(col + 0.5) * s, (row + 0.5) * s];
}

export function drawGrid(ctx: CanvasRenderingContext2D, geometry: MapGeometry): void {
  const scale = geometry.pixelsPerMeter * geometry.cellSizeM;
  ctx.fillStyle = "#ffffff";
  const [width, height] = canvasSize(geometry);
  ctx.fillRect(0, 0, width, height);
  ctx.fillStyle = "#1a1a1a";
  geometry.grid.forEach((rowString, row) => {
    for (let col = 0; col < rowString.length; col++) {
      if (rowString[col] === "#") {
        ctx.fillRect(col * scale, row * scale, scale, scale);
      }
    }
  });
}

export function drawZone(
  ctx: CanvasRenderingContext2D,
  geometry: MapGeometry,
  draft: ZoneDraft,
  highlighted = false,
): void {
  if (draft.polygon.length < 2) return;
  const color = ZONE_COLORS[draft.kind];
  ctx.beginPath();
  draft.polygon.forEach((point, i) => {
    const [px, py] = toPixels(geometry, point);
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  });
  ctx.closePath();
  ctx.globalAlpha = 0.35;
  ctx.fillStyle = color;
  ctx.fill();
  ctx.globalAlpha = 1.0;
  ctx.lineWidth = highlighted ? 4 : 1.5;
  ctx.strokeStyle = highlighted ? "#ff00aa" : color;
  ctx.stroke();

  if (draft.kind === "road" && draft.direction) {
    const centroid: Point = [
      draft.polygon.reduce((acc, p) => acc + p[0], 0) / draft.polygon.length,
      draft.polygon.reduce((acc, p) => acc + p[1], 0) / draft.polygon.length,
    ];
    const headings = draft.twoWay
      ? [draft.direction, [-draft.direction[0], -draft.direction[1]] as Point]
      : [draft.direction];
    for (const heading of headings) {
      drawArrow(ctx, geometry, centroid, heading, color);
    }
  }
}

function drawArrow(
  ctx: CanvasRenderingContext2D,
  geometry: MapGeometry,
  from: Point,
  heading: Point,
  color: string,
): void {
  const norm = Math.hypot(heading[0], heading[1]) || 1;
  const len = 1.8 * geometry.cellSizeM;
  const tip: Point = [from[0] + (heading[0] / norm) * len, from[1] + (heading[1] / norm) * len];
  const [fx, fy] = toPixels(geometry, from);
  const [tx, ty] = toPixels(geometry, tip);
  ctx.strokeStyle = color;
  ctx.lineWidth = 2.5;
  ctx.beginPath();
  ctx.moveTo(fx, fy);
  ctx.lineTo(tx, ty);
  const angle = Math.atan2(ty - fy, tx - fx);
  const barb = 7;
  ctx.moveTo(tx, ty);
  ctx.lineTo(tx - barb * Math.cos(angle - 0.5), ty - barb * Math.sin(angle - 0.5));
  ctx.moveTo(tx, ty);
  ctx.lineTo(tx - barb * Math.cos(angle + 0.5), ty - barb * Math.sin(angle + 0.5));
  ctx.stroke();
}

export function drawPath(
  ctx: CanvasRenderingContext2D,
  geometry: MapGeometry,
  path: PathView,
  color: string,
  emphasized: boolean,
): void {
  if (path.cells.length === 0) return;
  ctx.beginPath();
  path.cells.forEach(([row, col], i) => {
    const [px, py] = toPixels(geometry, cellCenter(geometry, row, col));
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  });
  ctx.lineWidth = emphasized ? 4.5 : 2.5;
  ctx.strokeStyle = color;
  ctx.globalAlpha = emphasized ? 1.0 : 0.75;
  ctx.stroke();
  ctx.globalAlpha = 1.0;
}

export function drawMarker(
  ctx: CanvasRenderingContext2D,
  geometry: MapGeometry,
  row: number,
  col: number,
  color: string,
  shape: "circle" | "square",
): void {
  const [px, py] = toPixels(geometry, cellCenter(geometry, row, col));
  ctx.fillStyle = color;
  if (shape === "circle") {
    ctx.beginPath();
    ctx.arc(px, py, 5, 0, 2 * Math.PI);
    ctx.fill();
  } else {
    ctx.fillRect(px - 5, py - 5, 10, 10);
  }
}
