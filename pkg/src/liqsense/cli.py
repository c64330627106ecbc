"""Command-line entry point wiring the pipeline.

Subcommands: simulate, calibrate, detect, fit, train, eval, export,
serve.  Parameter precedence is flags > --params config file >
defaults.  The DROPLEX_DATA_DIR environment variable supplies the
default data root for commands that read session directories.

Failures print a machine-readable JSON error to stderr and exit with a
code that identifies the class of failure: 2 usage, 3 schema violation,
4 dimension mismatch, 5 missing labels, 1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from . import calibration, physics, serve as serve_mod, session_io
from .detection import DetectionParams, TriggerParams, detect_deposit_events, detect_over_session
from .errors import DimensionError, LiqsenseError, MissingLabelError, SchemaError
from .heatmap import DeviceProfile
from .learn import (
    CnnConfig,
    TrainConfig,
    assemble_framewise,
    container_feature_data,
    kfold_evaluate,
    kfold_evaluate_forest,
    save_model,
    train_cnn,
    train_forest,
)
from .simulator import ClassSpec, SimConfig, generate_dataset, run_scenario, _liquid_from_spec

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_SCHEMA = 3
EXIT_DIMENSION = 4
EXIT_LABELS = 5

# keys a --params config file may carry; mirrors the flag names
CONFIG_KEYS = (
    "z",
    "min_size",
    "aspect_diff_max",
    "alpha",
    "lambda",
    "epsilon",
    "frames_per_region",
    "folds",
    "seed",
    "epochs",
    "batch_size",
    "learning_rate",
    "trees",
    "depth",
)

DEFAULTS = {
    "z": 2.0,
    "min_size": 1,
    "aspect_diff_max": 2,
    "alpha": 2.0,
    "lambda": calibration.DEFAULT_LAMBDA,
    "epsilon": calibration.DEFAULT_EPSILON,
    "frames_per_region": 50,
    "folds": 5,
    "seed": 0,
    "epochs": 50,
    "batch_size": 16,
    "learning_rate": 1e-3,
    "trees": 100,
    "depth": 6,
}


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc


def _load_params_file(path) -> dict:
    payload = _load_json(path)
    if not isinstance(payload, dict):
        raise SchemaError(f"{path}: params file must be a JSON object")
    unknown = set(payload) - set(CONFIG_KEYS)
    if unknown:
        raise SchemaError(f"{path}: unknown parameter keys {sorted(unknown)}")
    return payload


def resolve_params(args) -> dict:
    """flags > config file > defaults."""
    resolved = dict(DEFAULTS)
    if getattr(args, "params", None):
        resolved.update(_load_params_file(args.params))
    for key in CONFIG_KEYS:
        attr = "lam" if key == "lambda" else key
        value = getattr(args, attr, None)
        if value is not None:
            resolved[key] = value
    return resolved


def _detection_params(p) -> DetectionParams:
    return DetectionParams(
        z=float(p["z"]), min_size=int(p["min_size"]), aspect_diff_max=int(p["aspect_diff_max"])
    )


def _data_dir(args) -> Path:
    data = getattr(args, "data", None) or os.environ.get("DROPLEX_DATA_DIR")
    if not data:
        raise SchemaError("no data directory: pass --data or set DROPLEX_DATA_DIR")
    path = Path(data)
    if not path.is_dir():
        raise SchemaError(f"data directory {path} does not exist")
    return path


def _write_json(path, payload) -> None:
    Path(path).write_text(session_io.dumps_canonical(payload) + "\n")


def _load_sessions(directory: Path):
    sessions = []
    for path in sorted(directory.glob("*.json")):
        try:
            sessions.append(session_io.load_session_json(path))
        except SchemaError:
            continue
    if not sessions:
        raise SchemaError(f"no session files found in {directory}")
    return sessions


def cmd_simulate(args) -> int:
    p = resolve_params(args)
    if bool(args.scenario) == bool(args.dataset):
        raise SchemaError("simulate needs exactly one of --scenario or --dataset")
    if args.scenario:
        script = _load_json(args.scenario)
        if args.seed is not None:
            script["seed"] = args.seed
        session = run_scenario(script)
        session_io.save_session_json(session, args.out, precision=4)
        print(f"wrote {args.out}")
        return EXIT_OK
    spec = _load_json(args.dataset)
    if not isinstance(spec, dict) or "classes" not in spec:
        raise SchemaError("dataset spec must be an object with a 'classes' list")
    if args.seed is not None:
        seed = int(args.seed)
    elif "seed" in spec:
        seed = int(spec["seed"])
    else:
        seed = int(p["seed"])
    try:
        classes = [
            ClassSpec(
                name=c["name"],
                liquid=_liquid_from_spec(c["liquid"]),
                volume_ul=float(c.get("volume_ul", 500.0)),
                kind=c.get("kind", "drop"),
                container_radius_cells=float(c.get("container_radius_cells", 6.0)),
                base_kind=c.get("base_kind", "plastic-cup"),
            )
            for c in spec["classes"]
        ]
        config = SimConfig(
            profile=DeviceProfile(**spec.get("profile", {})),
            seed=seed,
            filter_tau_s=float(spec.get("filter_tau_s", 5.0)),
        )
        sessions = generate_dataset(
            config,
            classes,
            drops_per_class=int(spec.get("drops_per_class", 10)),
            frames_per_drop=int(spec.get("frames_per_drop", 50)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, LiqsenseError):
            raise
        raise SchemaError(f"bad dataset spec: {exc}") from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, session in enumerate(sessions):
        name = f"session_{i:04d}_{session.metadata.get('class', 'x')}.json"
        session_io.save_session_json(session, out / name, precision=4)
    print(f"wrote {len(sessions)} sessions to {out}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    p = resolve_params(args)
    points = calibration.load_calibration_points_csv(args.points)
    smap = calibration.build_sensitivity_map(
        points,
        dims=(args.rows, args.cols),
        lam=float(p["lambda"]),
        negate_regularizer=args.negate_regularizer,
    )
    cmap = calibration.compensation_map(smap, epsilon=float(p["epsilon"]))
    _write_json(
        args.out,
        {
            "sensitivity": calibration.sensitivity_map_to_dict(smap),
            "compensation": calibration.compensation_map_to_dict(cmap),
        },
    )
    print(f"wrote {args.out} ({len(points)} calibration points)")
    return EXIT_OK


def cmd_detect(args) -> int:
    p = resolve_params(args)
    session = session_io.load_session_json(args.session)
    compensation = (
        serve_mod.load_compensation_file(args.compensation) if args.compensation else None
    )
    params = _detection_params(p)
    trigger = TriggerParams(alpha=float(p["alpha"]))
    payload = {
        "params": {
            "z": params.z,
            "min_size": params.min_size,
            "aspect_diff_max": params.aspect_diff_max,
            "alpha": trigger.alpha,
        },
        "deposit_events": detect_deposit_events(session, trigger),
        "frames": detect_over_session(session, params, compensation),
    }
    _write_json(args.out, payload)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    rows = []
    with open(args.data, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["sigma", "eps_r", "observed"]
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != expected:
            raise SchemaError(
                f"{args.data}: expected CSV header 'sigma,eps_r,observed', got {reader.fieldnames}"
            )
        try:
            for record in reader:
                liq = physics.LiquidProperties(
                    sigma=float(record["sigma"]), eps_r=float(record["eps_r"])
                )
                rows.append((liq, float(record["observed"])))
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{args.data}: bad fit row: {exc}") from exc
    geometry = physics.CellGeometry(
        area_mm2=args.area, pitch_mm=4.2, omega_rad_s=DeviceProfile().omega_rad_s
    )
    if args.model == "physics":
        fit = physics.fit_physics_model(rows, geometry, area_mm2=args.area)
    else:
        fit = physics.fit_quadratic_model(rows)
    _write_json(args.out, fit.to_dict())
    print(f"wrote {args.out} (r_squared={fit.r_squared:.4f})")
    return EXIT_OK


def _assemble(args, p):
    sessions = _load_sessions(_data_dir(args))
    compensation = (
        serve_mod.load_compensation_file(args.compensation) if args.compensation else None
    )
    dataset = assemble_framewise(
        sessions,
        _detection_params(p),
        frames_per_region=int(p["frames_per_region"]),
        trigger_params=TriggerParams(alpha=float(p["alpha"])),
        compensation=compensation,
    )
    manifest = {
        "n_sessions": len(sessions),
        "n_samples": len(dataset),
        "classes": list(dataset.classes),
        "frames_per_region": int(p["frames_per_region"]),
    }
    return sessions, dataset, manifest


def _train_config(p) -> TrainConfig:
    return TrainConfig(
        epochs=int(p["epochs"]),
        batch_size=int(p["batch_size"]),
        learning_rate=float(p["learning_rate"]),
        folds=int(p["folds"]),
        frames_per_region=int(p["frames_per_region"]),
        seed=int(p["seed"]),
    )


def cmd_train(args) -> int:
    p = resolve_params(args)
    if args.classifier == "cnn":
        _, dataset, manifest = _assemble(args, p)
        x, y, _ = dataset.to_arrays()
        model = train_cnn(x, y, dataset.classes, CnnConfig(), _train_config(p))
        save_model(model, args.out)
    else:
        sessions = _load_sessions(_data_dir(args))
        data = container_feature_data(sessions)
        model = train_forest(data, trees=int(p["trees"]), depth=int(p["depth"]), seed=int(p["seed"]))
        _write_json(args.out, model.to_dict())
        manifest = {"n_sessions": len(sessions), "n_samples": len(data),
                    "classes": list(model.classes)}
    _write_json(str(args.out) + ".manifest.json", manifest)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    p = resolve_params(args)
    if args.classifier == "cnn":
        _, dataset, _ = _assemble(args, p)
        report = kfold_evaluate(dataset, CnnConfig(), _train_config(p), k=int(p["folds"]))
    else:
        sessions = _load_sessions(_data_dir(args))
        data = container_feature_data(sessions)
        report = kfold_evaluate_forest(
            data, k=int(p["folds"]), trees=int(p["trees"]), depth=int(p["depth"]),
            seed=int(p["seed"]),
        )
    _write_json(args.out, report.to_dict())
    print(f"wrote {args.out} (accuracy={report.accuracy:.4f})")
    return EXIT_OK


def cmd_export(args) -> int:
    p = resolve_params(args)
    session = session_io.load_session_json(args.session)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    session_io.save_session_json(session, out / "session.json")
    params = _detection_params(p)
    trigger = TriggerParams(alpha=float(p["alpha"]))
    _write_json(
        out / "detections.json",
        {
            "params": {
                "z": params.z,
                "min_size": params.min_size,
                "aspect_diff_max": params.aspect_diff_max,
                "alpha": trigger.alpha,
            },
            "deposit_events": detect_deposit_events(session, trigger),
            "frames": detect_over_session(session, params),
        },
    )
    grids = [f.grid for f in session.deltas]
    _write_json(
        out / "meta.json",
        {
            "profile": session_io.profile_to_dict(session.profile),
            "n_frames": len(session.deltas),
            "metadata": session.metadata,
            "value_range": [float(min(g.min() for g in grids)),
                            float(max(g.max() for g in grids))],
        },
    )
    print(f"wrote bundle to {out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    server = serve_mod.serve(
        _data_dir(args),
        host=args.host,
        port=args.port,
        compensation_path=args.compensation,
        ui_dir=args.ui,
    )
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port} (ctrl-c to stop)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liqsense",
        description="Touchscreen liquid-sensing pipeline: simulate, calibrate, "
        "detect, fit, train, evaluate, export, serve.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, out_required=True):
        p.add_argument("--params", help="JSON config file (flags override it)")
        p.add_argument("--seed", type=int, help="random seed")
        if out_required:
            p.add_argument("--out", required=True, help="output path")

    def detection_flags(p):
        p.add_argument("--z", type=float, help="z-score detection threshold")
        p.add_argument("--min-size", dest="min_size", type=int, help="minimum region cells")
        p.add_argument(
            "--aspect-max", dest="aspect_diff_max", type=int,
            help="max |height - width| of a region bbox",
        )
        p.add_argument("--alpha", type=float, help="deposit-trigger sensitivity")
        p.add_argument("--compensation", help="calibrate-output JSON to compensate frames")

    p = sub.add_parser("simulate", help="run a scenario script or generate a dataset")
    p.add_argument("--scenario", help="scenario script JSON")
    p.add_argument("--dataset", help="dataset spec JSON")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="fit sensitivity/compensation maps from points")
    p.add_argument("--points", required=True, help="calibration CSV with header x,y,s")
    p.add_argument("--rows", type=int, default=32)
    p.add_argument("--cols", type=int, default=52)
    p.add_argument("--lambda", dest="lam", type=float, help="smoothing factor")
    p.add_argument("--epsilon", type=float, help="compensation stability term")
    p.add_argument(
        "--negate-regularizer", action="store_true",
        help="use the (A - lambda I) w = s regularizer variant",
    )
    common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("detect", help="droplet regions + deposit events for a session")
    p.add_argument("--session", required=True, help="session JSON file")
    detection_flags(p)
    common(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("fit", help="fit a capacitance model to sigma,eps_r,observed rows")
    p.add_argument("--data", required=True, help="CSV with header sigma,eps_r,observed")
    p.add_argument("--model", choices=("physics", "quadratic"), default="physics")
    p.add_argument("--area", type=float, default=0.7081, help="pinned electrode area (mm^2)")
    common(p)
    p.set_defaults(func=cmd_fit)

    for name, fn in (("train", cmd_train), ("eval", cmd_eval)):
        p = sub.add_parser(name, help=f"{name} a classifier on a session directory")
        p.add_argument("--data", help="session directory (default: DROPLEX_DATA_DIR)")
        p.add_argument("--classifier", choices=("cnn", "forest"), default="cnn")
        p.add_argument("--frames-per-region", dest="frames_per_region", type=int)
        p.add_argument("--folds", type=int)
        p.add_argument("--epochs", type=int)
        detection_flags(p)
        common(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("export", help="write a UI-consumable bundle for a session")
    p.add_argument("--session", required=True)
    detection_flags(p)
    common(p)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("serve", help="serve sessions to the browser UI")
    p.add_argument("--data", help="session directory (default: DROPLEX_DATA_DIR)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8754)
    p.add_argument("--compensation", help="calibrate-output JSON")
    p.add_argument("--ui", help="directory of built UI files to serve")
    p.set_defaults(func=cmd_serve)

    return parser


def _emit_error(kind: str, code: int, message: str) -> None:
    print(
        json.dumps({"error": {"code": code, "kind": kind, "message": message}}),
        file=sys.stderr,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as exc:
        _emit_error("schema", EXIT_SCHEMA, str(exc))
        return EXIT_SCHEMA
    except DimensionError as exc:
        _emit_error("dimension", EXIT_DIMENSION, str(exc))
        return EXIT_DIMENSION
    except MissingLabelError as exc:
        _emit_error("missing-label", EXIT_LABELS, str(exc))
        return EXIT_LABELS
    except (OSError, ValueError, KeyError, IndexError, LiqsenseError) as exc:
        _emit_error("runtime", EXIT_RUNTIME, str(exc))
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
