"""Regenerate the frontend test fixtures from real endpoint payloads.

The browser viewer's tests assert byte-equality between stored overlays
and endpoint responses, so the fixtures must be exactly what the serve
layer emits for the bundled demo session.

Run from the repository root:  python tools/make_ui_fixtures.py
"""

import shutil
import tempfile
from pathlib import Path

from liqsense.serve import SessionStore
from liqsense.session_io import bundled_demo_session_path, dumps_canonical

ROOT = Path(__file__).resolve().parent.parent
FRAME = 2  # has the priming drop plus single-cell noise regions at min_size 1

DETECT_VARIANTS = [
    (2.0, 1, "detect_z2_min1"),
    (3.0, 1, "detect_z3_min1"),
    (10.0, 1, "detect_z10_min1"),
    (2.0, 5, "detect_z2_min5"),
]


def main():
    out = ROOT / "frontend" / "tests" / "fixtures"
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        shutil.copy(bundled_demo_session_path(), Path(tmp) / "demo.json")
        store = SessionStore(tmp)

        def write(name, payload):
            (out / f"{name}.json").write_text(dumps_canonical(payload) + "\n")

        write("sessions", store.list_payload())
        write("session_demo", store.session_payload("demo"))
        write("frame2_sample-delta", store.frame_payload("demo", FRAME, "sample-delta"))
        for z, min_size, name in DETECT_VARIANTS:
            write(
                name,
                store.detect_payload(
                    "demo",
                    {
                        "frame_index": FRAME,
                        "params": {"z": z, "min_size": min_size, "aspect_diff_max": 2},
                    },
                ),
            )
        write("trigger_batch", store.trigger_payload("demo", {"alpha": 2.0, "mode": "batch"}))
    print(f"wrote fixtures to {out}")


if __name__ == "__main__":
    main()
