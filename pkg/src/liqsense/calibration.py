"""Macro-scale sensitivity calibration and noise-reduction characterization.

The screen's spatially varying sensitivity is interpolated from sparse
calibration measurements with a thin-plate-spline radial basis
interpolant, phi(r) = r^2 log r (phi(0) = 0 by continuity).  Weights
solve the regularized dense system

    (A + lambda I) w = s,      A_ij = phi(||p_i - p_j||)

by direct factorization plus one iterative-refinement pass; calibration
sets are small (hundreds of points) so dense is fine.  There is no
affine polynomial term, so the interpolant can grow like r^2 log r away
from the data; evaluation is only ever done inside the grid.

``negate_regularizer=True`` flips the regularizer sign, solving
(A - lambda I) w = s instead.  That variant is numerically fragile and
kept only as an explicitly requested mode.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, SchemaError
from .heatmap import Frame
from .session_io import grid_from_dict, grid_to_dict

DEFAULT_LAMBDA = 3.0
DEFAULT_EPSILON = 1e-6


@dataclass(frozen=True)
class CalibrationPoint:
    """One measured screen response s at cell coordinate (x, y).

    x runs along columns, y along rows, in cell units.
    """

    x: float
    y: float
    s: float

    def __post_init__(self):
        if not all(np.isfinite([self.x, self.y, self.s])):
            raise ValueError("calibration point has non-finite values")


@dataclass(frozen=True)
class TpsWeights:
    """Fitted interpolation weights, one per calibration point."""

    values: np.ndarray
    lam: float
    negate_regularizer: bool = False


@dataclass(frozen=True)
class SensitivityMap:
    grid: np.ndarray
    lam: float


@dataclass(frozen=True)
class CompensationMap:
    grid: np.ndarray
    lam: float
    epsilon: float


def tps_kernel(r):
    """Thin-plate-spline basis r^2 log r, zero at r = 0."""
    r = np.asarray(r, dtype=np.float64)
    out = np.zeros_like(r)
    nz = r > 0
    out[nz] = r[nz] ** 2 * np.log(r[nz])
    return out


def _point_array(points) -> tuple[np.ndarray, np.ndarray]:
    pts = np.array([(p.x, p.y) for p in points], dtype=np.float64)
    vals = np.array([p.s for p in points], dtype=np.float64)
    return pts, vals


def _pairwise_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt((diff**2).sum(axis=2))


def tps_fit(points, lam: float = DEFAULT_LAMBDA, negate_regularizer: bool = False) -> TpsWeights:
    """Solve the regularized system for the interpolation weights."""
    points = list(points)
    if len(points) < 2:
        raise ValueError("need at least 2 calibration points")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    pts, s = _point_array(points)
    dist = _pairwise_dist(pts, pts)
    off_diag = dist + np.eye(len(points))
    if np.any(off_diag == 0):
        raise ValueError("duplicate calibration points make the system singular")

    sign = -1.0 if negate_regularizer else 1.0
    system = tps_kernel(dist) + sign * lam * np.eye(len(points))
    try:
        w = np.linalg.solve(system, s)
        # one refinement pass tightens the residual well below 1e-6
        w += np.linalg.solve(system, s - system @ w)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"calibration system is singular: {exc}") from exc
    return TpsWeights(values=w, lam=lam, negate_regularizer=negate_regularizer)


def tps_predict(weights: TpsWeights, points, query_xy) -> np.ndarray:
    """Evaluate the interpolant at arbitrary (x, y) query positions."""
    pts, _ = _point_array(points)
    query = np.atleast_2d(np.asarray(query_xy, dtype=np.float64))
    if len(weights.values) != len(pts):
        raise DimensionError("weights were fitted on a different point set")
    return tps_kernel(_pairwise_dist(query, pts)) @ weights.values


def tps_evaluate(weights: TpsWeights, points, dims: tuple[int, int]) -> SensitivityMap:
    """Evaluate the interpolant at every cell center of a rows x cols grid."""
    rows, cols = dims
    if rows < 1 or cols < 1:
        raise DimensionError(f"bad grid dims {dims}")
    pts, _ = _point_array(points)
    if np.any(pts[:, 0] < 0) or np.any(pts[:, 0] > cols - 1):
        raise ValueError("calibration x coordinates outside grid bounds")
    if np.any(pts[:, 1] < 0) or np.any(pts[:, 1] > rows - 1):
        raise ValueError("calibration y coordinates outside grid bounds")
    xs, ys = np.meshgrid(np.arange(cols), np.arange(rows))
    query = np.column_stack([xs.ravel(), ys.ravel()]).astype(np.float64)
    values = tps_predict(weights, points, query)
    return SensitivityMap(grid=values.reshape(rows, cols), lam=weights.lam)


def build_sensitivity_map(points, dims, lam=DEFAULT_LAMBDA, negate_regularizer=False) -> SensitivityMap:
    return tps_evaluate(tps_fit(points, lam, negate_regularizer), points, dims)


def compensation_map(smap: SensitivityMap, epsilon: float = DEFAULT_EPSILON) -> CompensationMap:
    """Per-cell correction min(S) / (S + epsilon).

    The minimum is taken over the interpolated grid, so the most
    responsive cell maps to ~1 and everything else is scaled up on
    application (values multiply measured heatmaps).
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    grid = np.asarray(smap.grid, dtype=np.float64)
    if not np.all(np.isfinite(grid)):
        raise ValueError("sensitivity map contains non-finite values")
    denom = grid + epsilon
    if np.any(denom == 0):
        raise ValueError("sensitivity + epsilon hits zero; compensation undefined")
    return CompensationMap(grid=grid.min() / denom, lam=smap.lam, epsilon=epsilon)


def apply_compensation(frame: Frame, cmap: CompensationMap) -> Frame:
    if frame.shape != cmap.grid.shape:
        raise DimensionError(f"frame {frame.shape} vs map {cmap.grid.shape}")
    return frame.with_grid(frame.grid * cmap.grid)


def noise_reduction_curve(frames, max_window: int):
    """Screen-averaged noise std of N-frame moving averages, N = 1..max_window.

    Needs max_window + 1 frames so even the largest window leaves at
    least two averaged frames to take a std over.  For i.i.d. noise the
    curve follows sigma / sqrt(N).
    """
    frames = list(frames)
    if max_window < 1:
        raise ValueError("max_window must be >= 1")
    if len(frames) < max_window + 1:
        raise ValueError(
            f"need at least {max_window + 1} frames for window {max_window}, "
            f"got {len(frames)}"
        )
    stack = np.stack([f.grid for f in frames])
    csum = np.concatenate([np.zeros((1,) + stack.shape[1:]), np.cumsum(stack, axis=0)])
    curve = []
    for n in range(1, max_window + 1):
        moving = (csum[n:] - csum[:-n]) / n
        curve.append((n, float(moving.std(axis=0, ddof=1).mean())))
    return curve


def load_calibration_points_csv(path) -> list[CalibrationPoint]:
    """Read calibration points from a CSV file with header x,y,s."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["x", "y", "s"]:
            raise SchemaError(f"{path}: expected CSV header 'x,y,s', got {reader.fieldnames}")
        try:
            return [
                CalibrationPoint(float(row["x"]), float(row["y"]), float(row["s"]))
                for row in reader
            ]
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{path}: bad calibration row: {exc}") from exc


def sensitivity_map_to_dict(smap: SensitivityMap, precision=None) -> dict:
    return grid_to_dict(smap.grid, "sensitivity", precision, **{"lambda": smap.lam})


def compensation_map_to_dict(cmap: CompensationMap, precision=None) -> dict:
    return grid_to_dict(
        cmap.grid, "compensation", precision, **{"lambda": cmap.lam, "epsilon": cmap.epsilon}
    )


def compensation_map_from_dict(d: dict) -> CompensationMap:
    grid, extra = grid_from_dict(d, expect_kind="compensation")
    try:
        return CompensationMap(
            grid=grid, lam=float(extra["lambda"]), epsilon=float(extra["epsilon"])
        )
    except KeyError as exc:
        raise SchemaError(f"compensation map missing field: {exc}") from exc


def sensitivity_map_from_dict(d: dict) -> SensitivityMap:
    grid, extra = grid_from_dict(d, expect_kind="sensitivity")
    try:
        return SensitivityMap(grid=grid, lam=float(extra["lambda"]))
    except KeyError as exc:
        raise SchemaError(f"sensitivity map missing field: {exc}") from exc
