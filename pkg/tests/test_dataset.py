import numpy as np
import pytest

from conftest import make_session
from liqsense.calibration import CompensationMap
from liqsense.detection import DetectionParams
from liqsense.errors import MissingLabelError
from liqsense.learn.dataset import assemble_framewise, container_feature_data
from liqsense.simulator import (
    IPA,
    TAP_WATER,
    ClassSpec,
    SimConfig,
    VirtualLiquid,
    generate_dataset,
)

# tap water spiked with 40% alcohol: permittivity and conductivity both drop
SPIKED_WATER = VirtualLiquid(
    sigma=0.02, eps_r=56.5, surface_tension_mN_m=40.0, name="tap-water-40ipa"
)

# 500 uL drops cover >= 13 cells, so single noise cells are not droplets
DROP_PARAMS = DetectionParams(z=2.0, min_size=4, aspect_diff_max=2)


@pytest.fixture(scope="module")
def drop_sessions():
    return generate_dataset(
        SimConfig(seed=20),
        [ClassSpec("base", TAP_WATER), ClassSpec("spiked", SPIKED_WATER)],
        drops_per_class=2,
        frames_per_drop=15,
    )


class TestAssembleFramewise:
    def test_counting_and_labels(self, drop_sessions):
        dataset = assemble_framewise(drop_sessions, DROP_PARAMS, frames_per_region=10)
        assert dataset.classes == ("base", "spiked")
        # one droplet region per session, 10 frames each
        assert len(dataset) == len(drop_sessions) * 10
        region_ids = {s.region_id for s in dataset.samples}
        assert len(region_ids) == len(drop_sessions)
        for sample in dataset.samples:
            assert sample.patch.shape == (8, 8)

    def test_expansion_factor_equals_frames_per_region(self, drop_sessions):
        dataset = assemble_framewise(drop_sessions, DROP_PARAMS, frames_per_region=12)
        per_region = {}
        for s in dataset.samples:
            per_region[s.region_id] = per_region.get(s.region_id, 0) + 1
        assert set(per_region.values()) == {12}

    def test_deposit_frame_found_by_trigger(self, drop_sessions):
        dataset = assemble_framewise(drop_sessions, DROP_PARAMS, frames_per_region=5)
        planted = drop_sessions[0].metadata["deposit_frame_index"]
        first_region_frames = [
            s.frame_index for s in dataset.samples if s.region_id == 0
        ]
        assert min(first_region_frames) == planted

    def test_patches_carry_negative_droplet_signal(self, drop_sessions):
        dataset = assemble_framewise(drop_sessions, DROP_PARAMS, frames_per_region=10)
        x, y, _ = dataset.to_arrays()
        # the central cells of every patch sit well below zero
        centers = x[:, 0, 3:5, 3:5].mean(axis=(1, 2))
        assert np.all(centers < -40)
        assert set(y.tolist()) == {0, 1}

    def test_compensation_is_applied(self, drop_sessions):
        shape = drop_sessions[0].profile.shape
        half = CompensationMap(grid=np.full(shape, 0.5), lam=0.0, epsilon=0.0)
        plain = assemble_framewise(drop_sessions, DROP_PARAMS, frames_per_region=5)
        halved = assemble_framewise(drop_sessions, DROP_PARAMS, frames_per_region=5, compensation=half)
        np.testing.assert_allclose(
            halved.samples[0].patch, 0.5 * plain.samples[0].patch, atol=1e-12
        )

    def test_missing_label_rejected(self, drop_sessions):
        stripped = make_session(
            drop_sessions[0].reference.grid,
            [f.grid for f in drop_sessions[0].deltas],
            profile=drop_sessions[0].profile,
        )
        with pytest.raises(MissingLabelError):
            assemble_framewise([stripped])

    def test_no_deposit_event_rejected(self):
        flat = make_session(
            np.zeros((32, 52)),
            [np.zeros((32, 52)) for _ in range(20)],
            metadata={"class": "nothing"},
        )
        with pytest.raises(ValueError):
            assemble_framewise([flat])

    def test_event_without_droplet_rejected(self):
        # a positive (finger-like) step trips the trigger but is not a droplet
        grids = [np.zeros((32, 52)) for _ in range(10)]
        for g in grids[5:]:
            g[10:12, 10:12] = 400.0
        session = make_session(
            np.zeros((32, 52)), grids, metadata={"class": "touch"}
        )
        with pytest.raises(ValueError, match="no droplet regions"):
            assemble_framewise([session], DROP_PARAMS)

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            assemble_framewise([])

    def test_zero_class_separation_scores_near_chance(self):
        # identical liquids in both classes: the labels carry no signal
        from liqsense.learn import CnnConfig, TrainConfig, kfold_evaluate

        sessions = generate_dataset(
            SimConfig(seed=22),
            [ClassSpec("a", TAP_WATER), ClassSpec("b", TAP_WATER)],
            drops_per_class=8,
            frames_per_drop=14,
        )
        dataset = assemble_framewise(sessions, DROP_PARAMS, frames_per_region=12)
        report = kfold_evaluate(
            dataset,
            CnnConfig(),
            TrainConfig(epochs=6, batch_size=16, folds=4, seed=3),
            k=4,
        )
        assert abs(report.accuracy - 0.5) <= 0.10


class TestContainerFeatureData:
    def test_features_from_container_sessions(self):
        sessions = generate_dataset(
            SimConfig(seed=21),
            [
                ClassSpec("water", TAP_WATER, kind="container"),
                ClassSpec("ipa", IPA, kind="container"),
            ],
            drops_per_class=2,
            frames_per_drop=12,
        )
        data = container_feature_data(sessions, frames_per_session=6)
        assert len(data) == len(sessions) * 6
        for feats, label in data:
            assert feats.present
            assert label in ("water", "ipa")
        water_means = [f.positive_mean for f, lbl in data if lbl == "water"]
        ipa_means = [f.positive_mean for f, lbl in data if lbl == "ipa"]
        assert min(water_means) > max(ipa_means)
