// Wires state, API client and renderer. All detection math happens
// server-side; this layer only sequences requests and repaints.

import { ApiClient, FramePayload } from "./api.js";
import {
  DetectionParams,
  ViewState,
  applyDetection,
  createViewState,
  markServeDown,
  nextSeq,
  selectSession,
  setFrame,
} from "./state.js";

export interface Renderer {
  paintFrame(frame: FramePayload, state: ViewState): void;
  paintOverlay(state: ViewState): void;
  showError(message: string): void;
  clearError(): void;
  updatePanels(state: ViewState, frame: FramePayload | null): void;
}

const DEBOUNCE_MS = 150;
const FRAME_PERIOD_MS = 600;

export class Controller {
  readonly state: ViewState = createViewState();
  private lastFrame: FramePayload | null = null;
  private debounceTimer: ReturnType<typeof setTimeout> | null = null;
  private playTimer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private api: ApiClient,
    private renderer: Renderer,
  ) {}

  async openSession(id: string, frameCount: number): Promise<void> {
    selectSession(this.state, id, frameCount);
    await this.showFrame(0);
  }

  /** Fetch and paint one frame; the index in state stays authoritative. */
  async showFrame(index: number): Promise<void> {
    if (this.state.sessionId === null) return;
    setFrame(this.state, index);
    const shown = this.state.frameIndex;
    try {
      const { payload } = await this.api.getFrame(
        this.state.sessionId,
        shown,
        this.state.displayMode,
      );
      if (this.state.frameIndex !== shown) return; // user moved on
      this.lastFrame = payload;
      this.renderer.clearError();
      this.renderer.paintFrame(payload, this.state);
      this.renderer.updatePanels(this.state, payload);
    } catch (err) {
      this.renderer.showError(String(err));
      return;
    }
    await this.runDetection();
  }

  /** Switching mode re-requests the current frame with the new kind. */
  async setDisplayMode(mode: ViewState["displayMode"]): Promise<void> {
    this.state.displayMode = mode;
    await this.showFrame(this.state.frameIndex);
  }

  /** Parameter tweaks debounce into a single detection request. */
  tuneParameters(partial: Partial<DetectionParams & { averagingWindow: number }>): void {
    const { averagingWindow, ...params } = partial;
    Object.assign(this.state.params, params);
    if (averagingWindow !== undefined) {
      this.state.averagingWindow = Math.max(1, Math.round(averagingWindow));
    }
    if (this.debounceTimer !== null) clearTimeout(this.debounceTimer);
    this.debounceTimer = setTimeout(() => {
      this.debounceTimer = null;
      void this.runDetection();
    }, DEBOUNCE_MS);
  }

  async runDetection(): Promise<void> {
    if (this.state.sessionId === null) return;
    const seq = nextSeq(this.state);
    try {
      const response = await this.api.detect(this.state.sessionId, {
        frame_index: this.state.frameIndex,
        window: this.state.averagingWindow,
        params: { ...this.state.params },
      });
      if (applyDetection(this.state, seq, response)) {
        this.renderer.clearError();
        this.renderer.paintOverlay(this.state);
        this.renderer.updatePanels(this.state, this.lastFrame);
      }
    } catch (err) {
      if (markServeDown(this.state, seq)) {
        this.renderer.showError(String(err)); // last overlay stays up
      }
    }
  }

  selectRegion(index: number | null): void {
    this.state.selectedRegion = index;
    this.renderer.paintOverlay(this.state);
    this.renderer.updatePanels(this.state, this.lastFrame);
  }

  play(speed: number = 1): void {
    this.pause();
    this.state.playing = true;
    this.state.speed = speed;
    this.playTimer = setInterval(() => {
      if (!this.state.playing) return;
      const next = this.state.frameIndex + 1 >= this.state.frameCount
        ? 0
        : this.state.frameIndex + 1;
      void this.showFrame(next);
    }, FRAME_PERIOD_MS / speed);
  }

  pause(): void {
    this.state.playing = false;
    if (this.playTimer !== null) {
      clearInterval(this.playTimer);
      this.playTimer = null;
    }
  }
}
