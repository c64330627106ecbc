// Canvas painting. The drawing surface is abstracted to the handful of
// 2D-context members used, so tests can record calls without a DOM.

import type { FramePayload, Region } from "./api.js";
import { cssColor } from "./color.js";
import type { ViewState } from "./state.js";

export interface Surface {
  // property types mirror CanvasRenderingContext2D so a real context satisfies this
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
}

export const CELL_PX = 16;

export function canvasSize(rows: number, cols: number): [number, number] {
  return [cols * CELL_PX, rows * CELL_PX];
}

export function renderHeatmap(surface: Surface, frame: FramePayload, state: ViewState): void {
  const [lo, hi] = state.colorBounds;
  for (let r = 0; r < frame.rows; r++) {
    for (let c = 0; c < frame.cols; c++) {
      surface.fillStyle = cssColor(frame.grid[r * frame.cols + c], lo, hi);
      surface.fillRect(c * CELL_PX, r * CELL_PX, CELL_PX, CELL_PX);
    }
  }
}

export function renderOverlay(surface: Surface, regions: Region[], selected: number | null): void {
  regions.forEach((region, index) => {
    const [r0, c0, r1, c1] = region.bbox;
    surface.strokeStyle = index === selected ? "#ffd400" : "#10d010";
    surface.lineWidth = index === selected ? 3 : 2;
    surface.strokeRect(
      c0 * CELL_PX - 1,
      r0 * CELL_PX - 1,
      (c1 - c0 + 1) * CELL_PX + 2,
      (r1 - r0 + 1) * CELL_PX + 2,
    );
    const [cr, cc] = region.centroid;
    surface.fillStyle = "#ffffff";
    surface.beginPath();
    surface.arc((cc + 0.5) * CELL_PX, (cr + 0.5) * CELL_PX, 3, 0, 2 * Math.PI);
    surface.fill();
  });
}

/** Cell under a canvas pixel, for region selection clicks. */
export function cellAt(x: number, y: number): [number, number] {
  return [Math.floor(y / CELL_PX), Math.floor(x / CELL_PX)];
}

export function regionAt(regions: Region[], row: number, col: number): number | null {
  for (let i = 0; i < regions.length; i++) {
    if (regions[i].cells.some(([r, c]) => r === row && c === col)) return i;
  }
  return null;
}
