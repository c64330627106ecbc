"""Read-only local HTTP endpoint feeding the browser UI.

JSON over HTTP on localhost.  Every response is a pure function of the
stored sessions and the request parameters; the server never mutates
session files.  Endpoints:

    GET  /api/sessions                          list sessions
    GET  /api/sessions/<id>                     profile + metadata
    GET  /api/sessions/<id>/frames/<n>?kind=raw|measured|sample-delta|compensated
    POST /api/sessions/<id>/detect              {frame_index, window?, params?}
    POST /api/sessions/<id>/trigger             {alpha?, mode?}

Detection always runs on sample-delta frames (optionally averaged over
the trailing ``window`` frames, optionally compensated), which is what
the segmentation algorithm is defined on.
"""

from __future__ import annotations

import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .calibration import apply_compensation, compensation_map_from_dict
from .detection import (
    DetectionParams,
    TriggerParams,
    container_features,
    detect_deposit_events,
    detect_droplets,
)
from .errors import LiqsenseError, SchemaError
from .heatmap import Frame, Session, reconstruct_measured, sample_delta, temporal_average
from .session_io import dumps_canonical, load_session_json, profile_to_dict

FRAME_KINDS = ("raw", "measured", "sample-delta", "compensated")


class SessionStore:
    """Immutable view over the session files of a data directory."""

    def __init__(self, data_dir, compensation=None):
        self.data_dir = Path(data_dir)
        if not self.data_dir.is_dir():
            raise SchemaError(f"data directory {self.data_dir} does not exist")
        self.compensation = compensation
        self._sessions: dict[str, Session] = {}
        for path in sorted(self.data_dir.glob("*.json")):
            try:
                self._sessions[path.stem] = load_session_json(path)
            except SchemaError:
                continue  # non-session JSON files live alongside
        if not self._sessions:
            raise SchemaError(f"no session files found in {self.data_dir}")

    def ids(self):
        return list(self._sessions)

    def get(self, session_id: str) -> Session:
        if session_id not in self._sessions:
            raise KeyError(session_id)
        return self._sessions[session_id]

    def list_payload(self) -> dict:
        return {
            "sessions": [
                {
                    "id": sid,
                    "n_frames": len(session.deltas),
                    "rows": session.profile.rows,
                    "cols": session.profile.cols,
                    "metadata": session.metadata,
                }
                for sid, session in self._sessions.items()
            ]
        }

    def session_payload(self, session_id: str) -> dict:
        session = self.get(session_id)
        return {
            "id": session_id,
            "profile": profile_to_dict(session.profile),
            "n_frames": len(session.deltas),
            "metadata": session.metadata,
            "has_compensation": self.compensation is not None,
        }

    def _kind_frame(self, session: Session, n: int, kind: str) -> Frame:
        if kind == "raw":
            return session.deltas[n]
        if kind == "measured":
            return reconstruct_measured(session, n)
        if kind == "sample-delta":
            return sample_delta(session, n)
        if kind == "compensated":
            frame = sample_delta(session, n)
            if self.compensation is None:
                return frame  # identity map; flagged in the payload
            return apply_compensation(frame, self.compensation)
        raise SchemaError(f"unknown frame kind {kind!r}; options: {FRAME_KINDS}")

    def frame_payload(self, session_id: str, n: int, kind: str = "raw") -> dict:
        session = self.get(session_id)
        if not 0 <= n < len(session.deltas):
            raise IndexError(f"frame {n} out of range")
        frame = self._kind_frame(session, n, kind)
        return {
            "session": session_id,
            "frame_index": n,
            "kind": kind,
            "identity_compensation": kind == "compensated" and self.compensation is None,
            "timestamp_s": frame.timestamp_s,
            "rows": frame.shape[0],
            "cols": frame.shape[1],
            "grid": frame.grid.ravel().tolist(),
            "min": float(frame.grid.min()),
            "max": float(frame.grid.max()),
            "container_features": container_features(frame).to_dict(),
        }

    def detect_payload(self, session_id: str, request: dict) -> dict:
        session = self.get(session_id)
        n = int(request.get("frame_index", 0))
        if not 0 <= n < len(session.deltas):
            raise IndexError(f"frame {n} out of range")
        window = int(request.get("window", 1))
        raw = request.get("params", {})
        try:
            params = DetectionParams(
                z=float(raw.get("z", 2.0)),
                min_size=int(raw.get("min_size", 1)),
                aspect_diff_max=int(raw.get("aspect_diff_max", 2)),
            )
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"bad detection params: {exc}") from exc
        if window < 1:
            raise SchemaError("window must be >= 1")
        lo = max(0, n - window + 1)
        frames = [self._kind_frame(session, i, "compensated") for i in range(lo, n + 1)]
        frame = temporal_average(frames, len(frames))
        regions = detect_droplets(frame, params)
        return {
            "session": session_id,
            "frame_index": n,
            "window": window,
            "params": {
                "z": params.z,
                "min_size": params.min_size,
                "aspect_diff_max": params.aspect_diff_max,
            },
            "regions": [r.to_dict() for r in regions],
        }

    def trigger_payload(self, session_id: str, request: dict) -> dict:
        session = self.get(session_id)
        try:
            params = TriggerParams(alpha=float(request.get("alpha", 2.0)))
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"bad trigger params: {exc}") from exc
        mode = request.get("mode", "streaming")
        if mode not in ("batch", "streaming"):
            raise SchemaError(f"unknown trigger mode {mode!r}")
        events = detect_deposit_events(session, params, mode=mode)
        return {
            "session": session_id,
            "alpha": params.alpha,
            "mode": mode,
            "events": events,
        }


def load_compensation_file(path):
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    if "compensation" in payload:  # a calibrate-output bundle
        payload = payload["compensation"]
    return compensation_map_from_dict(payload)


def make_handler(store: SessionStore, ui_dir=None):
    ui_root = Path(ui_dir).resolve() if ui_dir else None

    class Handler(BaseHTTPRequestHandler):
        # quiet by default; the CLI prints the listening address
        def log_message(self, *args):
            pass

        def _send(self, status: int, payload: dict):
            body = dumps_canonical(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.end_headers()
            self.wfile.write(body)

        def _error(self, status: int, message: str):
            self._send(status, {"error": {"status": status, "message": message}})

        def _route(self, method: str):
            parsed = urlparse(self.path)
            parts = [p for p in parsed.path.split("/") if p]
            try:
                if method == "GET" and parts == ["api", "sessions"]:
                    return self._send(200, store.list_payload())
                if method == "GET" and len(parts) == 3 and parts[:2] == ["api", "sessions"]:
                    return self._send(200, store.session_payload(parts[2]))
                if (
                    method == "GET"
                    and len(parts) == 5
                    and parts[:2] == ["api", "sessions"]
                    and parts[3] == "frames"
                ):
                    query = parse_qs(parsed.query)
                    kind = query.get("kind", ["raw"])[0]
                    return self._send(
                        200, store.frame_payload(parts[2], int(parts[4]), kind)
                    )
                if (
                    method == "POST"
                    and len(parts) == 4
                    and parts[:2] == ["api", "sessions"]
                    and parts[3] in ("detect", "trigger")
                ):
                    length = int(self.headers.get("Content-Length", 0))
                    raw = self.rfile.read(length) if length else b"{}"
                    try:
                        request = json.loads(raw) if raw.strip() else {}
                    except json.JSONDecodeError as exc:
                        return self._error(400, f"request body is not JSON: {exc}")
                    if parts[3] == "detect":
                        return self._send(200, store.detect_payload(parts[2], request))
                    return self._send(200, store.trigger_payload(parts[2], request))
                if method == "GET" and ui_root is not None:
                    return self._static(parsed.path)
                return self._error(404, f"no route for {method} {parsed.path}")
            except KeyError as exc:
                return self._error(404, f"unknown session {exc}")
            except IndexError as exc:
                return self._error(404, str(exc))
            except (SchemaError, ValueError) as exc:
                return self._error(400, str(exc))
            except LiqsenseError as exc:
                return self._error(500, str(exc))

        def _static(self, path: str):
            rel = path.lstrip("/") or "index.html"
            target = (ui_root / rel).resolve()
            if not str(target).startswith(str(ui_root)) or not target.is_file():
                return self._error(404, f"no such file {rel}")
            content_types = {
                ".html": "text/html",
                ".js": "text/javascript",
                ".css": "text/css",
                ".json": "application/json",
                ".map": "application/json",
            }
            body = target.read_bytes()
            self.send_response(200)
            self.send_header(
                "Content-Type", content_types.get(target.suffix, "application/octet-stream")
            )
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            self._route("GET")

        def do_POST(self):
            self._route("POST")

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.end_headers()

    return Handler


def serve(data_dir, host="127.0.0.1", port=8754, compensation_path=None, ui_dir=None):
    """Run the endpoint until interrupted.  Returns the bound server."""
    compensation = (
        load_compensation_file(compensation_path) if compensation_path else None
    )
    store = SessionStore(data_dir, compensation=compensation)
    server = ThreadingHTTPServer((host, port), make_handler(store, ui_dir=ui_dir))
    return server
