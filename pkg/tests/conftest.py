import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from liqsense.heatmap import DeviceProfile, Frame, Session


@pytest.fixture
def profile():
    return DeviceProfile()


@pytest.fixture
def small_profile():
    return DeviceProfile(rows=6, cols=8)


def make_session(reference, deltas, profile=None, metadata=None):
    """Session from raw grids, timestamps auto-assigned at 0.6 s."""
    reference = np.asarray(reference, dtype=float)
    if profile is None:
        profile = DeviceProfile(rows=reference.shape[0], cols=reference.shape[1])
    frames = [
        Frame(grid=np.asarray(g, dtype=float), timestamp_s=0.6 * (i + 1))
        for i, g in enumerate(deltas)
    ]
    return Session(
        profile=profile,
        reference=Frame(grid=reference, timestamp_s=0.0),
        deltas=frames,
        metadata=metadata or {},
    )


@pytest.fixture
def random_session():
    rng = np.random.default_rng(42)
    reference = rng.normal(100, 10, (32, 52))
    deltas = rng.normal(-20, 15, (8, 32, 52))
    return make_session(reference, deltas)
