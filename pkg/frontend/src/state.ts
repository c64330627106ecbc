// Single view state with monotone request sequencing. In-flight
// detection requests carry a sequence number; a response (or failure)
// is applied only if nothing newer has been applied since, so a slow
// stale response can never overwrite a fresh overlay.

import type { DetectionPayload } from "./api.js";

export type DisplayMode = "raw" | "measured" | "sample-delta" | "compensated";

export interface DetectionParams {
  z: number;
  min_size: number;
  aspect_diff_max: number;
}

export interface Overlay {
  payload: DetectionPayload;
  text: string; // exact endpoint bytes
}

export interface ViewState {
  sessionId: string | null;
  frameCount: number;
  frameIndex: number;
  playing: boolean;
  speed: number;
  displayMode: DisplayMode;
  colorBounds: [number, number];
  params: DetectionParams;
  triggerAlpha: number;
  averagingWindow: number;
  selectedRegion: number | null;
  overlay: Overlay | null;
  serveDown: boolean;
  issuedSeq: number;
  appliedSeq: number;
}

// symmetric around zero at the device saturation bound
export const DEFAULT_COLOR_BOUNDS: [number, number] = [-800, 800];

export function createViewState(): ViewState {
  return {
    sessionId: null,
    frameCount: 0,
    frameIndex: 0,
    playing: false,
    speed: 1,
    displayMode: "sample-delta",
    colorBounds: [...DEFAULT_COLOR_BOUNDS],
    params: { z: 2, min_size: 1, aspect_diff_max: 2 },
    triggerAlpha: 2,
    averagingWindow: 1,
    selectedRegion: null,
    overlay: null,
    serveDown: false,
    issuedSeq: 0,
    appliedSeq: 0,
  };
}

export function selectSession(state: ViewState, id: string, frameCount: number): void {
  state.sessionId = id;
  state.frameCount = frameCount;
  state.frameIndex = 0;
  state.playing = false;
  state.overlay = null;
  state.selectedRegion = null;
}

/** Clamp into session bounds; the stored index is authoritative. */
export function setFrame(state: ViewState, index: number): void {
  const last = Math.max(0, state.frameCount - 1);
  state.frameIndex = Math.min(Math.max(Math.round(index), 0), last);
}

export function setColorBounds(state: ViewState, lo: number, hi: number): void {
  if (!(lo < hi)) return; // bounds stay ordered; ignore degenerate input
  state.colorBounds = [lo, hi];
}

export function nextSeq(state: ViewState): number {
  state.issuedSeq += 1;
  return state.issuedSeq;
}

/** Apply a detection response unless something newer already landed. */
export function applyDetection(state: ViewState, seq: number, overlay: Overlay): boolean {
  if (seq <= state.appliedSeq) return false; // stale: discard
  state.appliedSeq = seq;
  state.overlay = overlay;
  state.serveDown = false;
  if (
    state.selectedRegion !== null &&
    state.selectedRegion >= overlay.payload.regions.length
  ) {
    state.selectedRegion = null;
  }
  return true;
}

/** A failed request shows the banner but keeps the last good overlay. */
export function markServeDown(state: ViewState, seq: number): boolean {
  if (seq <= state.appliedSeq) return false; // a newer response already landed
  state.appliedSeq = seq;
  state.serveDown = true;
  return true;
}

export function regionCount(state: ViewState): number {
  return state.overlay === null ? 0 : state.overlay.payload.regions.length;
}
