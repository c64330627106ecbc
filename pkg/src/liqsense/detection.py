"""Droplet segmentation, deposit-event triggering, and region statistics.

Droplets are found per frame by a z-score rule: cells strictly below
mean - z*std (statistics over the whole frame) are candidates, grouped
into 8-connected components, then filtered by minimum size and by a
compactness rule on the bounding box.  Frames are expected to be
baseline-subtracted (sample deltas), where a drop shows up as a
negative device-unit blob.

Deposit events are flagged from the frame-to-frame change series
d_t = max_ij |H_t - H_{t-1}|, thresholded at mean(d) + alpha*std(d).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import label_components
from .heatmap import Frame, Session, sample_delta


@dataclass(frozen=True)
class DetectionParams:
    z: float = 2.0
    min_size: int = 1
    aspect_diff_max: int = 2

    def __post_init__(self):
        if self.z <= 0:
            raise ValueError("z must be > 0")
        if self.min_size < 1:
            raise ValueError("min_size must be >= 1")
        if self.aspect_diff_max < 0:
            raise ValueError("aspect_diff_max must be >= 0")


@dataclass(frozen=True)
class TriggerParams:
    alpha: float = 2.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")


def _connected(cells: frozenset) -> bool:
    seen = {next(iter(cells))}
    stack = list(seen)
    while stack:
        r, c = stack.pop()
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                nb = (r + dr, c + dc)
                if nb in cells and nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
    return len(seen) == len(cells)


@dataclass(frozen=True)
class DropRegion:
    """A detected 8-connected component with aggregate statistics.

    centroid is the magnitude-weighted mean of cell coordinates, using
    |value| of negative cells as weights (uniform if none are negative).
    bbox is inclusive: (row0, col0, row1, col1).
    """

    cells: frozenset
    centroid: tuple[float, float]
    bbox: tuple[int, int, int, int]
    sum_device_units: float
    negative_magnitude: float

    def __post_init__(self):
        if not self.cells:
            raise ValueError("region has no cells")
        if not _connected(self.cells):
            raise ValueError("region cells are not 8-connected")
        r0, c0, r1, c1 = self.bbox
        if not (r0 <= self.centroid[0] <= r1 and c0 <= self.centroid[1] <= c1):
            raise ValueError("centroid outside bounding box")

    @property
    def bbox_height(self) -> int:
        return self.bbox[2] - self.bbox[0] + 1

    @property
    def bbox_width(self) -> int:
        return self.bbox[3] - self.bbox[1] + 1

    def to_dict(self) -> dict:
        # floats rounded at export so equivalent computations that differ
        # only in accumulation order serialize identically
        return {
            "cells": sorted(map(list, self.cells)),
            "centroid": [round(v, 6) for v in self.centroid],
            "bbox": list(self.bbox),
            "sum_device_units": round(self.sum_device_units, 6),
            "negative_magnitude": round(self.negative_magnitude, 6),
        }


def region_from_cells(frame: Frame, cells) -> DropRegion:
    """Build a DropRegion with statistics taken from the given frame."""
    cells = frozenset((int(r), int(c)) for r, c in cells)
    rows, cols = frame.shape
    for r, c in cells:
        if not (0 <= r < rows and 0 <= c < cols):
            raise IndexError(f"region cell {(r, c)} outside {frame.shape} grid")
    rr = np.array([r for r, _ in cells])
    cc = np.array([c for _, c in cells])
    values = frame.grid[rr, cc]
    weights = np.where(values < 0, -values, 0.0)
    total = weights.sum()
    if total > 0:
        centroid = ((weights * rr).sum() / total, (weights * cc).sum() / total)
    else:
        centroid = (rr.mean(), cc.mean())
    bbox = (int(rr.min()), int(cc.min()), int(rr.max()), int(cc.max()))
    # float rounding can land a hair outside the box; clamp it back
    centroid = (
        float(np.clip(centroid[0], bbox[0], bbox[2])),
        float(np.clip(centroid[1], bbox[1], bbox[3])),
    )
    return DropRegion(
        cells=cells,
        centroid=centroid,
        bbox=bbox,
        sum_device_units=float(values.sum()),
        negative_magnitude=float(-values[values < 0].sum()),
    )


def detect_droplets(frame: Frame, params: DetectionParams = DetectionParams()):
    """Segment droplet regions in one baseline-subtracted frame.

    Returns regions sorted by negative_magnitude, largest first.
    Adding a constant to every cell leaves the output unchanged (the
    threshold shifts with the mean).
    """
    grid = frame.grid
    mu = grid.mean()
    sigma = grid.std()
    mask = grid < mu - params.z * sigma
    labels, n = label_components(mask)
    regions = []
    for label in range(1, n + 1):
        rr, cc = np.nonzero(labels == label)
        if len(rr) < params.min_size:
            continue
        height = rr.max() - rr.min() + 1
        width = cc.max() - cc.min() + 1
        if abs(int(height) - int(width)) > params.aspect_diff_max:
            continue
        regions.append(region_from_cells(frame, zip(rr, cc)))
    regions.sort(key=lambda reg: (-reg.negative_magnitude, reg.bbox))
    return regions


def frame_change_series(session: Session) -> np.ndarray:
    """d_t = max_ij |H_t - H_{t-1}| for t = 1..n-1.

    Consecutive-frame differences are identical whether computed on raw
    deltas, measured frames, or sample deltas, so raw deltas are used.
    """
    if len(session.deltas) < 3:
        raise ValueError("need at least 3 frames to form a change series")
    stack = np.stack([f.grid for f in session.deltas])
    return np.abs(np.diff(stack, axis=0)).max(axis=(1, 2))


def detect_deposit_events(
    session: Session, params: TriggerParams = TriggerParams(), mode: str = "batch"
):
    """Frame indices where the change series exceeds its threshold.

    batch: one threshold tau = mean(d) + alpha*std(d) from the full
    series (population std).  streaming: causal variant for live use;
    each d_t is compared against the threshold of the d values seen
    before it (defined from t = 3 on, once two prior values exist).
    Strict inequality, so a constant session yields no events.
    """
    d = frame_change_series(session)
    indices = np.arange(1, len(session.deltas))
    if mode == "batch":
        tau = d.mean() + params.alpha * d.std()
        return [int(t) for t, dt in zip(indices, d) if dt > tau]
    if mode == "streaming":
        events = []
        for k in range(2, len(d)):
            prior = d[:k]
            tau = prior.mean() + params.alpha * prior.std()
            if d[k] > tau:
                events.append(int(indices[k]))
        return events
    raise ValueError(f"unknown trigger mode {mode!r}")


def extract_patch(frame: Frame, centroid, size: int = 8) -> np.ndarray:
    """Fixed-size square patch around the rounded centroid.

    The centroid rounds half-up to a cell; that cell lands at patch
    index size//2.  Cells outside the grid are zero-filled so the patch
    is always size x size.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    rows, cols = frame.shape
    r0 = int(np.floor(centroid[0] + 0.5)) - size // 2
    c0 = int(np.floor(centroid[1] + 0.5)) - size // 2
    patch = np.zeros((size, size))
    rlo, rhi = max(r0, 0), min(r0 + size, rows)
    clo, chi = max(c0, 0), min(c0 + size, cols)
    if rlo < rhi and clo < chi:
        patch[rlo - r0 : rhi - r0, clo - c0 : chi - c0] = frame.grid[rlo:rhi, clo:chi]
    return patch


@dataclass(frozen=True)
class ContainerFeatures:
    """Statistics over the positive (finger-like) cells of a frame.

    A container rim couples conductively and reads positive in device
    units; these are the through-container classification features.
    When no cell is positive the statistics are absent (None, count 0).
    """

    positive_mean: float | None
    positive_median: float | None
    positive_p75: float | None
    positive_cell_count: int

    @property
    def present(self) -> bool:
        return self.positive_cell_count > 0

    def vector(self) -> np.ndarray:
        if not self.present:
            raise ValueError("no positive cells; features absent")
        return np.array([self.positive_mean, self.positive_median, self.positive_p75])

    def to_dict(self) -> dict:
        return {
            "positive_mean": self.positive_mean,
            "positive_median": self.positive_median,
            "positive_p75": self.positive_p75,
            "positive_cell_count": self.positive_cell_count,
        }


def container_features(frame: Frame) -> ContainerFeatures:
    values = frame.grid[frame.grid > 0]
    if values.size == 0:
        return ContainerFeatures(None, None, None, 0)
    return ContainerFeatures(
        positive_mean=float(values.mean()),
        positive_median=float(np.percentile(values, 50)),
        positive_p75=float(np.percentile(values, 75)),
        positive_cell_count=int(values.size),
    )


def region_magnitude(frame: Frame, region: DropRegion) -> float:
    """Sum of |value| over region cells with a negative device-unit change."""
    rows, cols = frame.shape
    total = 0.0
    for r, c in region.cells:
        if not (0 <= r < rows and 0 <= c < cols):
            raise IndexError(f"region cell {(r, c)} outside {frame.shape} grid")
        v = frame.grid[r, c]
        if v < 0:
            total -= v
    return total


def detect_over_session(
    session: Session,
    params: DetectionParams = DetectionParams(),
    compensation=None,
):
    """Run droplet detection on every sample-delta frame of a session.

    Returns a JSON-ready list of {frame_index, regions} entries.
    """
    from .calibration import apply_compensation

    out = []
    for n in range(len(session.deltas)):
        frame = sample_delta(session, n)
        if compensation is not None:
            frame = apply_compensation(frame, compensation)
        regions = detect_droplets(frame, params)
        out.append({"frame_index": n, "regions": [r.to_dict() for r in regions]})
    return out
