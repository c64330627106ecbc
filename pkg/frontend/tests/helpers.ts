// Shared fixture plumbing: a FetchLike that answers from the captured
// endpoint payloads, byte for byte, and a call-counting renderer.

import { readFileSync } from "node:fs";

import type { FetchLike, FramePayload } from "../src/api.js";
import type { Renderer } from "../src/controller.js";
import type { ViewState } from "../src/state.js";

export function fixtureText(name: string): string {
  return readFileSync(new URL(`./fixtures/${name}`, import.meta.url), "utf8");
}

export function fixture<T>(name: string): T {
  return JSON.parse(fixtureText(name)) as T;
}

export interface RecordedRequest {
  url: string;
  body: unknown;
}

export interface FakeServer {
  fetchFn: FetchLike;
  requests: RecordedRequest[];
  failDetect: boolean;
}

/** Routes requests to fixture bytes; detect responses key on (z, min_size). */
export function makeFakeServer(): FakeServer {
  const server: FakeServer = { requests: [], failDetect: false, fetchFn: undefined! };
  const ok = (text: string) => ({ ok: true, status: 200, text: async () => text });
  server.fetchFn = async (url, init) => {
    const body = init?.body ? JSON.parse(init.body) : undefined;
    server.requests.push({ url, body });
    if (url.endsWith("/api/sessions")) return ok(fixtureText("sessions.json"));
    if (/\/api\/sessions\/demo\/frames\/\d+/.test(url)) {
      return ok(fixtureText("frame2_sample-delta.json"));
    }
    if (url.endsWith("/demo/detect")) {
      if (server.failDetect) throw new Error("connection refused");
      const { z, min_size } = body.params;
      const name = `detect_z${z}_min${min_size}.json`;
      return ok(fixtureText(name));
    }
    if (url.endsWith("/demo/trigger")) return ok(fixtureText("trigger_batch.json"));
    return { ok: false, status: 404, text: async () => `{"error": "no route ${url}"}` };
  };
  return server;
}

export interface FakeRenderer extends Renderer {
  frames: number;
  overlays: number;
  errors: string[];
  errorVisible: boolean;
  lastFrame: FramePayload | null;
  lastState: ViewState | null;
}

export function makeFakeRenderer(): FakeRenderer {
  return {
    frames: 0,
    overlays: 0,
    errors: [],
    errorVisible: false,
    lastFrame: null,
    lastState: null,
    paintFrame(frame, state) {
      this.frames += 1;
      this.lastFrame = frame;
      this.lastState = state;
    },
    paintOverlay(state) {
      this.overlays += 1;
      this.lastState = state;
    },
    showError(message) {
      this.errors.push(message);
      this.errorVisible = true;
    },
    clearError() {
      this.errorVisible = false;
    },
    updatePanels() {},
  };
}

export async function flush(): Promise<void> {
  for (let i = 0; i < 8; i++) await Promise.resolve();
}
