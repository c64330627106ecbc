"""Regenerate the bundled demo session and its golden detection file.

The demo session comes from a fixed-seed scenario.  The golden file is
produced by the brute-force oracles in tests/oracles.py (threshold +
flood fill, scalar statistics), NOT by the library's detection path, so
the golden-file test in tests/test_cli.py is a genuine two-route check.

Run from the repository root:  python tools/make_demo_assets.py
"""

import math
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

import oracles  # noqa: E402

from liqsense.session_io import (  # noqa: E402
    dumps_canonical,
    load_session_json,
    save_session_json,
)
from liqsense.simulator import run_scenario  # noqa: E402

SCENARIO = {
    "seed": 3,
    "filter_tau_s": 5.0,
    "metadata": {"class": "demo", "liquid": "tap-water", "volume_ul": 500.0},
    "operations": [
        {"op": "wait", "frames": 2},
        {"op": "deposit", "liquid": "tap-water", "center": [8, 44], "volume_ul": 500},
        {"op": "wait", "frames": 2},
        {"op": "draw_up"},
        {"op": "wait", "frames": 3},
        {"op": "deposit", "liquid": "tap-water", "center": [16, 14], "volume_ul": 500},
        {"op": "wait", "frames": 12},
    ],
}

# golden detection settings (the CLI defaults)
Z = 2.0
MIN_SIZE = 1
ASPECT_DIFF_MAX = 2
ALPHA = 2.0


def region_dict(grid, cells):
    """Region statistics recomputed with plain scalar loops."""
    cells = sorted(cells)
    values = [grid[r][c] for r, c in cells]
    weights = [-v if v < 0 else 0.0 for v in values]
    total = sum(weights)
    if total > 0:
        centroid = [
            sum(w * r for w, (r, _) in zip(weights, cells)) / total,
            sum(w * c for w, (_, c) in zip(weights, cells)) / total,
        ]
    else:
        centroid = [
            sum(r for r, _ in cells) / len(cells),
            sum(c for _, c in cells) / len(cells),
        ]
    bbox = [
        min(r for r, _ in cells),
        min(c for _, c in cells),
        max(r for r, _ in cells),
        max(c for _, c in cells),
    ]
    centroid = [
        float(min(max(centroid[0], bbox[0]), bbox[2])),
        float(min(max(centroid[1], bbox[1]), bbox[3])),
    ]
    return {
        "cells": [list(c) for c in cells],
        "centroid": [round(v, 6) for v in centroid],
        "bbox": bbox,
        "sum_device_units": round(sum(values), 6),
        "negative_magnitude": round(sum(weights), 6),
    }


def oracle_detection_payload(session):
    measured0 = oracles.add_grids(session.reference.grid, session.deltas[0].grid)
    frames_out = []
    sample_grids = []
    for n in range(len(session.deltas)):
        measured = oracles.add_grids(session.reference.grid, session.deltas[n].grid)
        sample = oracles.subtract_grids(measured, measured0)
        sample_grids.append(sample)
        regions = oracles.detect_regions(sample, Z, MIN_SIZE, ASPECT_DIFF_MAX)
        dicts = [region_dict(sample, cells) for cells in regions]
        dicts.sort(key=lambda d: (-d["negative_magnitude"], tuple(d["bbox"])))
        frames_out.append({"frame_index": n, "regions": dicts})
    events = oracles.deposit_events([f.grid for f in session.deltas], ALPHA)
    return {
        "params": {
            "z": Z,
            "min_size": MIN_SIZE,
            "aspect_diff_max": ASPECT_DIFF_MAX,
            "alpha": ALPHA,
        },
        "deposit_events": events,
        "frames": frames_out,
    }


def main():
    session_path = ROOT / "src" / "liqsense" / "data" / "demo_session.json"
    golden_path = ROOT / "tests" / "data" / "demo_regions_golden.json"
    golden_path.parent.mkdir(parents=True, exist_ok=True)

    session = run_scenario(SCENARIO)
    save_session_json(session, session_path, precision=4)
    # the oracle must see exactly what any consumer will load
    loaded = load_session_json(session_path)
    payload = oracle_detection_payload(loaded)
    golden_path.write_text(dumps_canonical(payload) + "\n")
    n_regions = sum(len(f["regions"]) for f in payload["frames"])
    print(f"wrote {session_path} ({len(loaded.deltas)} frames)")
    print(f"wrote {golden_path} ({n_regions} regions, events {payload['deposit_events']})")


if __name__ == "__main__":
    main()
