// DOM bootstrap: builds the renderer over a canvas and binds controls.

import { ApiClient, FramePayload } from "./api.js";
import { Controller, Renderer } from "./controller.js";
import { CELL_PX, canvasSize, cellAt, regionAt, renderHeatmap, renderOverlay } from "./render.js";
import { DisplayMode, ViewState, setColorBounds } from "./state.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("heatmap");
const overlayCanvas = el<HTMLCanvasElement>("overlay");
const banner = el<HTMLDivElement>("error-banner");
const stats = el<HTMLDivElement>("stats");
const sessionSelect = el<HTMLSelectElement>("session-select");
const frameSlider = el<HTMLInputElement>("frame-slider");
const frameLabel = el<HTMLSpanElement>("frame-label");

const api = new ApiClient("");

const renderer: Renderer = {
  paintFrame(frame: FramePayload, state: ViewState) {
    const [w, h] = canvasSize(frame.rows, frame.cols);
    for (const c of [canvas, overlayCanvas]) {
      if (c.width !== w || c.height !== h) {
        c.width = w;
        c.height = h;
      }
    }
    const ctx = canvas.getContext("2d")!;
    renderHeatmap(ctx, frame, state);
    frameSlider.max = String(Math.max(0, state.frameCount - 1));
    frameSlider.value = String(state.frameIndex);
    frameLabel.textContent =
      `frame ${state.frameIndex} / ${state.frameCount - 1}  ` +
      `(${frame.kind}, t=${frame.timestamp_s.toFixed(1)}s)`;
  },
  paintOverlay(state: ViewState) {
    const ctx = overlayCanvas.getContext("2d")!;
    ctx.clearRect(0, 0, overlayCanvas.width, overlayCanvas.height);
    if (state.overlay) {
      renderOverlay(ctx, state.overlay.payload.regions, state.selectedRegion);
    }
  },
  showError(message: string) {
    banner.textContent = `endpoint unreachable or rejected the request: ${message}`;
    banner.style.display = "block";
  },
  clearError() {
    banner.style.display = "none";
  },
  updatePanels(state: ViewState, frame: FramePayload | null) {
    const lines: string[] = [];
    const regions = state.overlay?.payload.regions ?? [];
    lines.push(`<b>${regions.length}</b> region(s) detected`);
    regions.forEach((region, i) => {
      const mark = i === state.selectedRegion ? " &#9733;" : "";
      lines.push(
        `#${i}${mark}: centroid (${region.centroid[0].toFixed(1)}, ` +
          `${region.centroid[1].toFixed(1)}), cells ${region.cells.length}, ` +
          `magnitude ${region.negative_magnitude.toFixed(1)}`,
      );
    });
    if (frame) {
      const f = frame.container_features;
      lines.push("<hr>");
      if (f.positive_cell_count > 0) {
        lines.push(
          `positive cells ${f.positive_cell_count}: mean ${f.positive_mean!.toFixed(1)}, ` +
            `median ${f.positive_median!.toFixed(1)}, p75 ${f.positive_p75!.toFixed(1)}`,
        );
      } else {
        lines.push("no positive cells in this frame");
      }
    }
    stats.innerHTML = lines.join("<br>");
  },
};

const controller = new Controller(api, renderer);

function bindSlider(id: string, apply: (value: number) => void): void {
  const slider = el<HTMLInputElement>(id);
  const label = el<HTMLSpanElement>(`${id}-value`);
  const update = () => {
    label.textContent = slider.value;
    apply(Number(slider.value));
  };
  slider.addEventListener("input", update);
  label.textContent = slider.value;
}

bindSlider("z", (value) => controller.tuneParameters({ z: value }));
bindSlider("min-size", (value) => controller.tuneParameters({ min_size: value }));
bindSlider("aspect-max", (value) => controller.tuneParameters({ aspect_diff_max: value }));
bindSlider("window", (value) => controller.tuneParameters({ averagingWindow: value }));
bindSlider("alpha", (value) => {
  controller.state.triggerAlpha = value;
  void refreshTrigger();
});
bindSlider("color-bound", (value) => {
  setColorBounds(controller.state, -value, value);
  void controller.showFrame(controller.state.frameIndex);
});

async function refreshTrigger(): Promise<void> {
  if (controller.state.sessionId === null) return;
  try {
    const { payload } = await api.trigger(
      controller.state.sessionId,
      controller.state.triggerAlpha,
      "batch",
    );
    el<HTMLSpanElement>("trigger-events").textContent =
      payload.events.length > 0 ? payload.events.join(", ") : "none";
  } catch {
    el<HTMLSpanElement>("trigger-events").textContent = "unavailable";
  }
}

for (const mode of ["raw", "measured", "sample-delta", "compensated"] as DisplayMode[]) {
  el<HTMLInputElement>(`mode-${mode}`).addEventListener("change", () => {
    void controller.setDisplayMode(mode);
  });
}

frameSlider.addEventListener("input", () => {
  controller.pause();
  void controller.showFrame(Number(frameSlider.value));
});
el<HTMLButtonElement>("play").addEventListener("click", () => {
  controller.play(Number(el<HTMLSelectElement>("speed").value));
});
el<HTMLButtonElement>("pause").addEventListener("click", () => controller.pause());
el<HTMLButtonElement>("step").addEventListener("click", () => {
  controller.pause();
  void controller.showFrame(controller.state.frameIndex + 1);
});

overlayCanvas.addEventListener("click", (event) => {
  const rect = overlayCanvas.getBoundingClientRect();
  const scale = overlayCanvas.width / rect.width || 1;
  const [row, col] = cellAt((event.clientX - rect.left) * scale, (event.clientY - rect.top) * scale);
  const regions = controller.state.overlay?.payload.regions ?? [];
  controller.selectRegion(regionAt(regions, row, col));
});

async function boot(): Promise<void> {
  try {
    const sessions = await api.listSessions();
    sessionSelect.innerHTML = "";
    for (const session of sessions) {
      const option = document.createElement("option");
      option.value = session.id;
      option.textContent = `${session.id} (${session.n_frames} frames)`;
      sessionSelect.appendChild(option);
    }
    sessionSelect.addEventListener("change", () => {
      const chosen = sessions.find((s) => s.id === sessionSelect.value);
      if (chosen) void controller.openSession(chosen.id, chosen.n_frames).then(refreshTrigger);
    });
    if (sessions.length > 0) {
      await controller.openSession(sessions[0].id, sessions[0].n_frames);
      await refreshTrigger();
    }
  } catch (err) {
    renderer.showError(String(err));
  }
}

void boot();

// keeps the module shape explicit for the cell-size constant users
export { CELL_PX };
