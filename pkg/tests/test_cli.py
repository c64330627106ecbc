import json
from pathlib import Path

import numpy as np
import pytest

from liqsense.cli import main
from liqsense.physics import (
    CellGeometry,
    LiquidProperties,
    PhysicsFit,
    load_liquid_table,
    predict_physics,
)
from liqsense.session_io import bundled_demo_session_path, load_session_json

DEMO = bundled_demo_session_path()
GOLDEN = Path(__file__).parent / "data" / "demo_regions_golden.json"

SCENARIO = {
    "seed": 12,
    "metadata": {"class": "demo"},
    "operations": [
        {"op": "wait", "frames": 2},
        {"op": "deposit", "liquid": "tap-water", "center": [16, 14], "volume_ul": 500},
        {"op": "wait", "frames": 6},
    ],
}

DATASET_SPEC = {
    "seed": 31,
    "drops_per_class": 2,
    "frames_per_drop": 12,
    "classes": [
        {"name": "base", "liquid": "tap-water"},
        {
            "name": "spiked",
            "liquid": {
                "sigma": 0.02,
                "eps_r": 56.5,
                "surface_tension_mN_m": 40.0,
                "name": "mix",
            },
        },
    ],
}


def run(*argv):
    return main([str(a) for a in argv])


class TestSimulate:
    def test_scenario_is_reproducible(self, tmp_path):
        script = tmp_path / "scenario.json"
        script.write_text(json.dumps(SCENARIO))
        out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
        assert run("simulate", "--scenario", script, "--out", out1) == 0
        assert run("simulate", "--scenario", script, "--out", out2) == 0
        assert out1.read_bytes() == out2.read_bytes()
        session = load_session_json(out1)
        assert len(session) == 8

    def test_dataset_generation(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps(DATASET_SPEC))
        out = tmp_path / "sessions"
        assert run("simulate", "--dataset", spec, "--out", out) == 0
        files = sorted(out.glob("*.json"))
        assert len(files) == 4
        labels = [load_session_json(f).metadata["class"] for f in files]
        assert labels == ["base", "base", "spiked", "spiked"]

    def test_scenario_and_dataset_are_exclusive(self, tmp_path):
        assert run("simulate", "--out", tmp_path / "x.json") == 3

    def test_malformed_scenario_gets_schema_exit(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{broken")
        assert run("simulate", "--scenario", bad, "--out", tmp_path / "x.json") == 3


class TestDetectGolden:
    def test_demo_session_matches_oracle_golden(self, tmp_path):
        out = tmp_path / "regions.json"
        assert run("detect", "--session", DEMO, "--out", out) == 0
        assert out.read_bytes() == GOLDEN.read_bytes()

    def test_flags_change_output(self, tmp_path):
        out = tmp_path / "regions.json"
        assert run("detect", "--session", DEMO, "--min-size", 4, "--out", out) == 0
        payload = json.loads(out.read_text())
        assert payload["params"]["min_size"] == 4
        for frame in payload["frames"]:
            for region in frame["regions"]:
                assert len(region["cells"]) >= 4


class TestCalibrate:
    def test_maps_written(self, tmp_path):
        rng = np.random.default_rng(0)
        lines = ["x,y,s"]
        cells = rng.choice(32 * 52, size=80, replace=False)
        for cell in cells:
            lines.append(f"{cell % 52},{cell // 52},{rng.uniform(80, 120):.3f}")
        points = tmp_path / "points.csv"
        points.write_text("\n".join(lines) + "\n")
        out = tmp_path / "maps.json"
        assert run("calibrate", "--points", points, "--out", out) == 0
        payload = json.loads(out.read_text())
        assert payload["sensitivity"]["kind"] == "sensitivity"
        assert payload["compensation"]["kind"] == "compensation"
        assert payload["compensation"]["lambda"] == 3.0
        assert len(payload["compensation"]["grid"]) == 32 * 52

    def test_bad_header_schema_exit(self, tmp_path):
        points = tmp_path / "points.csv"
        points.write_text("a,b,c\n1,2,3\n")
        assert run("calibrate", "--points", points, "--out", tmp_path / "m.json") == 3


class TestFit:
    def write_table(self, tmp_path):
        geometry = CellGeometry(0.7081, 4.2, 2 * np.pi * 1e5)
        fit = PhysicsFit(0.7081, 6.1360e12, 101.8077, 0.035408, r_squared=1.0)
        lines = ["sigma,eps_r,observed"]
        for row in load_liquid_table():
            lines.append(
                f"{row.properties.sigma},{row.properties.eps_r},"
                f"{predict_physics(fit, row.properties, geometry)!r}"
            )
        table = tmp_path / "table.csv"
        table.write_text("\n".join(lines) + "\n")
        return table, geometry

    def test_physics_fit_recovers_predictions(self, tmp_path):
        table, geometry = self.write_table(tmp_path)
        out = tmp_path / "fit.json"
        assert run("fit", "--data", table, "--model", "physics", "--out", out) == 0
        payload = json.loads(out.read_text())
        assert payload["model"] == "physics"
        assert payload["r_squared"] >= 0.999
        params = payload["params"]
        refit = PhysicsFit(
            params["area_mm2"], params["alpha"], params["beta"], params["gamma"], 1.0
        )
        for row in load_liquid_table():
            truth = predict_physics(
                PhysicsFit(0.7081, 6.1360e12, 101.8077, 0.035408, 1.0),
                row.properties,
                geometry,
            )
            got = predict_physics(refit, row.properties, geometry)
            assert got == pytest.approx(truth, rel=0.005)

    def test_quadratic_fit(self, tmp_path):
        table, _ = self.write_table(tmp_path)
        out = tmp_path / "fit.json"
        assert run("fit", "--data", table, "--model", "quadratic", "--out", out) == 0
        assert json.loads(out.read_text())["model"] == "quadratic"


class TestExport:
    def test_bundle_contents(self, tmp_path):
        out = tmp_path / "bundle"
        assert run("export", "--session", DEMO, "--out", out) == 0
        assert (out / "session.json").exists()
        detections = json.loads((out / "detections.json").read_text())
        assert "frames" in detections and "deposit_events" in detections
        meta = json.loads((out / "meta.json").read_text())
        assert meta["n_frames"] == 19
        assert meta["value_range"][0] < 0 < meta["value_range"][1]


@pytest.fixture(scope="module")
def session_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("sessions")
    spec = tmp / "spec.json"
    spec.write_text(json.dumps(DATASET_SPEC))
    out = tmp / "data"
    assert run("simulate", "--dataset", spec, "--out", out) == 0
    return out


class TestTrainEval:
    def test_cnn_train_writes_model_and_manifest(self, session_dir, tmp_path):
        out = tmp_path / "model.npz"
        code = run(
            "train", "--data", session_dir, "--out", out,
            "--min-size", 4, "--frames-per-region", 8, "--epochs", 2,
        )
        assert code == 0
        assert out.exists()
        manifest = json.loads(Path(str(out) + ".manifest.json").read_text())
        assert manifest["classes"] == ["base", "spiked"]
        assert manifest["n_samples"] == 4 * 8

    def test_eval_report(self, session_dir, tmp_path):
        out = tmp_path / "report.json"
        code = run(
            "eval", "--data", session_dir, "--out", out,
            "--min-size", 4, "--frames-per-region", 8, "--epochs", 4, "--folds", 2,
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert set(report["classes"]) == {"base", "spiked"}
        assert np.array(report["confusion"]).sum() == 4 * 8

    def test_missing_labels_exit_code(self, tmp_path):
        scenario = dict(SCENARIO)
        scenario.pop("metadata")
        script = tmp_path / "s.json"
        script.write_text(json.dumps(scenario))
        data = tmp_path / "data"
        data.mkdir()
        assert run("simulate", "--scenario", script, "--out", data / "s0.json") == 0
        assert run("train", "--data", data, "--out", tmp_path / "m.npz") == 5


class TestParamPrecedence:
    def test_flags_beat_config_file(self, tmp_path):
        params = tmp_path / "params.json"
        params.write_text(json.dumps({"z": 9.0, "min_size": 4}))
        out = tmp_path / "r.json"
        code = run(
            "detect", "--session", DEMO, "--params", params, "--z", 2.5, "--out", out
        )
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["params"]["z"] == 2.5  # flag wins
        assert payload["params"]["min_size"] == 4  # file beats default

    def test_unknown_config_keys_rejected(self, tmp_path):
        params = tmp_path / "params.json"
        params.write_text(json.dumps({"zz_top": 1}))
        code = run(
            "detect", "--session", DEMO, "--params", params, "--out", tmp_path / "r.json"
        )
        assert code == 3

    def test_unknown_flags_rejected(self):
        with pytest.raises(SystemExit) as exc:
            main(["detect", "--session", str(DEMO), "--out", "x", "--frobnicate"])
        assert exc.value.code == 2


class TestErrorCodes:
    def test_dimension_mismatch_exit_code(self, tmp_path):
        cmap = {
            "compensation": {
                "kind": "compensation",
                "rows": 2,
                "cols": 2,
                "grid": [1.0, 1.0, 1.0, 1.0],
                "lambda": 3.0,
                "epsilon": 1e-6,
            }
        }
        comp = tmp_path / "maps.json"
        comp.write_text(json.dumps(cmap))
        code = run(
            "detect", "--session", DEMO, "--compensation", comp,
            "--out", tmp_path / "r.json",
        )
        assert code == 4

    def test_missing_session_file_is_runtime_error(self, tmp_path):
        assert run("detect", "--session", tmp_path / "nope.json",
                   "--out", tmp_path / "r.json") == 1

    def test_env_var_data_root(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DROPLEX_DATA_DIR", str(tmp_path / "missing"))
        assert run("eval", "--out", tmp_path / "r.json") == 3
