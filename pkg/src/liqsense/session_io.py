"""Session file formats.

Canonical format is a single JSON object::

    {"profile": {...}, "reference": {"timestamp_s": ..., "grid": [...]},
     "deltas": [...], "metadata": {...}}

with grids stored as row-major flat arrays of length rows*cols.  The
CSV alternative stores one frame per file (rows of comma-separated
values) next to a sidecar JSON carrying profile, metadata and
timestamps.

Writers are deterministic: keys are sorted and floats use repr, so the
same session always serializes to the same bytes.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .heatmap import DeviceProfile, Frame, Session


def bundled_demo_session_path() -> Path:
    """Filesystem path of the demo session shipped with the package."""
    return Path(str(resources.files("liqsense").joinpath("data", "demo_session.json")))

_PROFILE_KEYS = (
    "rows",
    "cols",
    "pitch_mm",
    "frame_period_s",
    "drive_freq_hz",
    "sign_convention",
)


def _round(grid: np.ndarray, precision) -> np.ndarray:
    return grid if precision is None else np.round(grid, precision)


def profile_to_dict(profile: DeviceProfile) -> dict:
    return {k: getattr(profile, k) for k in _PROFILE_KEYS}


def profile_from_dict(d: dict) -> DeviceProfile:
    if not isinstance(d, dict):
        raise SchemaError("profile must be a JSON object")
    unknown = set(d) - set(_PROFILE_KEYS)
    if unknown:
        raise SchemaError(f"unknown profile keys: {sorted(unknown)}")
    try:
        return DeviceProfile(**d)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"bad profile: {exc}") from exc


def frame_to_dict(frame: Frame, precision=None) -> dict:
    return {
        "timestamp_s": frame.timestamp_s,
        "grid": _round(frame.grid, precision).ravel().tolist(),
    }


def frame_from_dict(d: dict, rows: int, cols: int) -> Frame:
    if not isinstance(d, dict) or "grid" not in d:
        raise SchemaError("frame must be an object with a 'grid' array")
    flat = d["grid"]
    if not isinstance(flat, list) or len(flat) != rows * cols:
        raise SchemaError(
            f"grid length {len(flat) if isinstance(flat, list) else '?'} "
            f"!= rows*cols = {rows * cols}"
        )
    try:
        grid = np.asarray(flat, dtype=np.float64).reshape(rows, cols)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"bad grid values: {exc}") from exc
    return Frame(grid=grid, timestamp_s=float(d.get("timestamp_s", 0.0)))


def session_to_dict(session: Session, precision=None) -> dict:
    return {
        "profile": profile_to_dict(session.profile),
        "reference": frame_to_dict(session.reference, precision),
        "deltas": [frame_to_dict(f, precision) for f in session.deltas],
        "metadata": session.metadata,
    }


def session_from_dict(d: dict) -> Session:
    if not isinstance(d, dict):
        raise SchemaError("session must be a JSON object")
    for key in ("profile", "reference", "deltas"):
        if key not in d:
            raise SchemaError(f"session missing required key {key!r}")
    profile = profile_from_dict(d["profile"])
    reference = frame_from_dict(d["reference"], profile.rows, profile.cols)
    if not isinstance(d["deltas"], list):
        raise SchemaError("'deltas' must be an array of frames")
    deltas = [frame_from_dict(f, profile.rows, profile.cols) for f in d["deltas"]]
    metadata = d.get("metadata", {})
    if not isinstance(metadata, dict):
        raise SchemaError("'metadata' must be an object")
    try:
        return Session(profile=profile, reference=reference, deltas=deltas, metadata=metadata)
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc


def dumps_canonical(obj) -> str:
    """Deterministic JSON encoding (sorted keys, no trailing spaces)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ": "), indent=1)


def save_session_json(session: Session, path, precision=None) -> None:
    Path(path).write_text(dumps_canonical(session_to_dict(session, precision)) + "\n")


def load_session_json(path) -> Session:
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    return session_from_dict(payload)


def save_session_csv(session: Session, directory, precision=None) -> None:
    """One frame per CSV file plus a sidecar JSON for profile/metadata."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    def write_frame(frame: Frame, path: Path):
        grid = _round(frame.grid, precision)
        lines = [",".join(repr(v) for v in row) for row in grid.tolist()]
        path.write_text("\n".join(lines) + "\n")

    write_frame(session.reference, directory / "reference.csv")
    for i, f in enumerate(session.deltas):
        write_frame(f, directory / f"delta_{i:05d}.csv")
    sidecar = {
        "profile": profile_to_dict(session.profile),
        "metadata": session.metadata,
        "reference_timestamp_s": session.reference.timestamp_s,
        "delta_timestamps_s": [f.timestamp_s for f in session.deltas],
    }
    (directory / "session.json").write_text(dumps_canonical(sidecar) + "\n")


def load_session_csv(directory) -> Session:
    directory = Path(directory)
    sidecar_path = directory / "session.json"
    if not sidecar_path.exists():
        raise SchemaError(f"{directory}: missing session.json sidecar")
    try:
        sidecar = json.loads(sidecar_path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{sidecar_path}: not valid JSON: {exc}") from exc
    profile = profile_from_dict(sidecar.get("profile", {}))

    def read_frame(path: Path, timestamp: float) -> Frame:
        rows = []
        for line in path.read_text().splitlines():
            if line.strip():
                rows.append([float(v) for v in line.split(",")])
        grid = np.asarray(rows, dtype=np.float64)
        if grid.shape != profile.shape:
            raise SchemaError(f"{path}: grid shape {grid.shape} != profile {profile.shape}")
        return Frame(grid=grid, timestamp_s=timestamp)

    reference = read_frame(
        directory / "reference.csv", float(sidecar.get("reference_timestamp_s", 0.0))
    )
    timestamps = sidecar.get("delta_timestamps_s", [])
    paths = sorted(directory.glob("delta_*.csv"))
    if len(paths) != len(timestamps):
        raise SchemaError(
            f"{directory}: {len(paths)} delta files but {len(timestamps)} timestamps"
        )
    deltas = [read_frame(p, float(t)) for p, t in zip(paths, timestamps)]
    try:
        return Session(
            profile=profile,
            reference=reference,
            deltas=deltas,
            metadata=sidecar.get("metadata", {}),
        )
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc


def grid_to_dict(grid: np.ndarray, kind: str, precision=None, **extra) -> dict:
    """Encode a bare map grid in the session-frame JSON style with a kind tag."""
    grid = np.asarray(grid, dtype=np.float64)
    payload = {
        "kind": kind,
        "rows": int(grid.shape[0]),
        "cols": int(grid.shape[1]),
        "grid": _round(grid, precision).ravel().tolist(),
    }
    payload.update(extra)
    return payload


def grid_from_dict(d: dict, expect_kind=None) -> tuple[np.ndarray, dict]:
    if not isinstance(d, dict) or "grid" not in d or "rows" not in d or "cols" not in d:
        raise SchemaError("map must be an object with 'kind', 'rows', 'cols', 'grid'")
    if expect_kind is not None and d.get("kind") != expect_kind:
        raise SchemaError(f"expected kind {expect_kind!r}, got {d.get('kind')!r}")
    rows, cols = int(d["rows"]), int(d["cols"])
    flat = d["grid"]
    if not isinstance(flat, list) or len(flat) != rows * cols:
        raise SchemaError(f"grid length != rows*cols = {rows * cols}")
    grid = np.asarray(flat, dtype=np.float64).reshape(rows, cols)
    extra = {k: v for k, v in d.items() if k not in ("kind", "rows", "cols", "grid")}
    return grid, extra
