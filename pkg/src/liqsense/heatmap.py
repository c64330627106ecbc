"""Core data model for capacitance heatmap recordings.

A recording session consists of a device profile, one reference frame
captured at session start, and an ordered stream of per-frame deltas
emitted by the touch controller.  All grids are stored as float64
arrays in device units; the controller emits integers, but averaging
and compensation produce fractions, so values are only rounded at
export time.

Sign convention: a positive physical capacitance change shows up as a
negative device-unit change (and vice versa).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

# Grids are indexed (row, col) with row 0 at the top-left of the
# exported file.  Timestamps are seconds from session start.


@dataclass(frozen=True)
class DeviceProfile:
    """Static description of the touch controller's sensing grid."""

    rows: int = 32
    cols: int = 52
    pitch_mm: float = 4.2
    frame_period_s: float = 0.6
    drive_freq_hz: float = 1.0e5
    # Only one convention is supported; the field exists so session
    # files are explicit about it.
    sign_convention: str = "device-units-inverted"

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid must have at least one row and column")
        if self.pitch_mm <= 0 or self.frame_period_s <= 0 or self.drive_freq_hz <= 0:
            raise ValueError("pitch, frame period and drive frequency must be positive")
        if self.sign_convention != "device-units-inverted":
            raise ValueError(f"unknown sign convention: {self.sign_convention!r}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def omega_rad_s(self) -> float:
        """Angular drive frequency (rad/s)."""
        return 2.0 * np.pi * self.drive_freq_hz


@dataclass(frozen=True)
class Frame:
    """One grid of device-unit readings at a timestamp."""

    grid: np.ndarray
    timestamp_s: float = 0.0

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=np.float64)
        if grid.ndim != 2:
            raise DimensionError(f"frame grid must be 2-D, got shape {grid.shape}")
        if not np.all(np.isfinite(grid)):
            raise ValueError("frame grid contains non-finite values")
        object.__setattr__(self, "grid", grid)

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    def with_grid(self, grid: np.ndarray) -> "Frame":
        return Frame(grid=grid, timestamp_s=self.timestamp_s)


@dataclass(frozen=True)
class Session:
    """A recording: profile + reference frame + ordered delta frames."""

    profile: DeviceProfile
    reference: Frame
    deltas: tuple[Frame, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "deltas", tuple(self.deltas))
        shape = self.profile.shape
        if self.reference.shape != shape:
            raise DimensionError(
                f"reference shape {self.reference.shape} != profile shape {shape}"
            )
        for i, f in enumerate(self.deltas):
            if f.shape != shape:
                raise DimensionError(f"delta {i} shape {f.shape} != profile shape {shape}")
        times = [f.timestamp_s for f in self.deltas]
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise ValueError("delta timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.deltas)


def reconstruct_measured(session: Session, n: int) -> Frame:
    """Measured frame n: reference plus the n-th delta."""
    if not 0 <= n < len(session.deltas):
        raise IndexError(f"frame index {n} out of range [0, {len(session.deltas)})")
    delta = session.deltas[n]
    return Frame(
        grid=session.reference.grid + delta.grid,
        timestamp_s=delta.timestamp_s,
    )


def sample_delta(session: Session, n: int) -> Frame:
    """Liquid-induced signal at frame n: measured frame n minus measured frame 0.

    Subtracting the first measured frame removes the static dielectric
    stack (cover glass, air gaps) from every subsequent reading; frame 0
    is identically zero by construction.
    """
    if not 0 <= n < len(session.deltas):
        raise IndexError(f"frame index {n} out of range [0, {len(session.deltas)})")
    first = session.deltas[0]
    delta = session.deltas[n]
    return Frame(grid=delta.grid - first.grid, timestamp_s=delta.timestamp_s)


def _stack(frames) -> np.ndarray:
    frames = list(frames)
    if not frames:
        raise ValueError("no frames supplied")
    shape = frames[0].shape
    for f in frames[1:]:
        if f.shape != shape:
            raise DimensionError("frames have mismatched shapes")
    return np.stack([f.grid for f in frames])


def temporal_average(frames, window: int) -> Frame:
    """Per-cell mean of the last ``window`` frames.

    Averaging N independent frames scales the per-cell noise standard
    deviation by 1/sqrt(N).
    """
    frames = list(frames)
    if window < 1:
        raise ValueError("window must be >= 1")
    if len(frames) < window:
        raise ValueError(f"need at least {window} frames, got {len(frames)}")
    stack = _stack(frames[-window:])
    return Frame(grid=stack.mean(axis=0), timestamp_s=frames[-1].timestamp_s)


def per_pixel_std(frames) -> Frame:
    """Per-cell sample standard deviation (N-1 divisor) across frames."""
    frames = list(frames)
    if len(frames) < 2:
        raise ValueError("per-pixel std needs at least 2 frames")
    stack = _stack(frames)
    return Frame(grid=stack.std(axis=0, ddof=1), timestamp_s=frames[-1].timestamp_s)
