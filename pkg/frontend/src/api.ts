// Thin client for the session endpoint. Every overlay the UI shows is
// exactly an endpoint response: the raw response text is kept next to
// the parsed payload so nothing is recomputed locally.

export interface SessionSummary {
  id: string;
  n_frames: number;
  rows: number;
  cols: number;
  metadata: Record<string, unknown>;
}

export interface ContainerFeatures {
  positive_mean: number | null;
  positive_median: number | null;
  positive_p75: number | null;
  positive_cell_count: number;
}

export interface FramePayload {
  session: string;
  frame_index: number;
  kind: string;
  timestamp_s: number;
  rows: number;
  cols: number;
  grid: number[];
  min: number;
  max: number;
  identity_compensation: boolean;
  container_features: ContainerFeatures;
}

export interface Region {
  cells: [number, number][];
  centroid: [number, number];
  bbox: [number, number, number, number];
  sum_device_units: number;
  negative_magnitude: number;
}

export interface DetectionPayload {
  session: string;
  frame_index: number;
  window: number;
  params: { z: number; min_size: number; aspect_diff_max: number };
  regions: Region[];
}

export interface TriggerPayload {
  session: string;
  alpha: number;
  mode: string;
  events: number[];
}

export interface DetectionRequest {
  frame_index: number;
  window: number;
  params: { z: number; min_size: number; aspect_diff_max: number };
}

/** Parsed payload plus the exact bytes the endpoint sent. */
export interface Response<T> {
  payload: T;
  text: string;
}

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ ok: boolean; status: number; text(): Promise<string> }>;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, body?: unknown): Promise<Response<T>> {
    const init = body === undefined
      ? undefined
      : {
          method: "POST",
          headers: { "Content-Type": "application/json" },
          body: JSON.stringify(body),
        };
    const response = await this.fetchFn(this.baseUrl + path, init);
    const text = await response.text();
    if (!response.ok) {
      throw new Error(`${path}: HTTP ${response.status}: ${text.slice(0, 200)}`);
    }
    return { payload: JSON.parse(text) as T, text };
  }

  async listSessions(): Promise<SessionSummary[]> {
    const { payload } = await this.request<{ sessions: SessionSummary[] }>("/api/sessions");
    return payload.sessions;
  }

  getFrame(sessionId: string, index: number, kind: string): Promise<Response<FramePayload>> {
    return this.request<FramePayload>(
      `/api/sessions/${encodeURIComponent(sessionId)}/frames/${index}?kind=${encodeURIComponent(kind)}`,
    );
  }

  detect(sessionId: string, request: DetectionRequest): Promise<Response<DetectionPayload>> {
    return this.request<DetectionPayload>(
      `/api/sessions/${encodeURIComponent(sessionId)}/detect`,
      request,
    );
  }

  trigger(sessionId: string, alpha: number, mode: string): Promise<Response<TriggerPayload>> {
    return this.request<TriggerPayload>(
      `/api/sessions/${encodeURIComponent(sessionId)}/trigger`,
      { alpha, mode },
    );
  }
}
