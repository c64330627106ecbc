import numpy as np
import pytest

from liqsense.detection import container_features
from liqsense.errors import SchemaError
from liqsense.heatmap import DeviceProfile, sample_delta
from liqsense.session_io import dumps_canonical, session_to_dict
from liqsense.simulator import (
    DI_WATER,
    IPA,
    TAP_WATER,
    ClassSpec,
    SimConfig,
    VirtualController,
    VirtualLiquid,
    contact_radius_cells,
    default_noise_std_map,
    default_sensitivity_map,
    drop_field,
    generate_dataset,
    run_scenario,
    volume_response,
)

ROWS, COLS = 32, 52
CENTER = (16.0, 26.0)


def clean_config(**overrides):
    """No noise, uniform sensitivity: field arithmetic is exact."""
    profile = overrides.pop("profile", DeviceProfile())
    base = dict(
        profile=profile,
        seed=0,
        noise_std_map=np.zeros(profile.shape),
        sensitivity_map=np.ones(profile.shape),
        filter_tau_s=5.0,
    )
    base.update(overrides)
    return SimConfig(**base)


class TestDefaultMaps:
    def test_noise_map_center_heavy_mean_eight(self):
        noise = default_noise_std_map(DeviceProfile())
        assert noise.mean() == pytest.approx(8.0, rel=1e-9)
        assert noise.min() >= 6.0 - 1e-9
        assert noise.max() <= 10.0 + 1e-9
        assert noise[16, 26] > noise[0, 0]

    def test_sensitivity_map_in_unit_interval(self):
        sens = default_sensitivity_map(DeviceProfile())
        assert np.all(sens > 0) and np.all(sens <= 1)
        # two lateral lobes beat both the middle and the edges
        mid_row = sens[16]
        assert mid_row[14] > mid_row[26]
        assert mid_row[38] > mid_row[26]
        assert mid_row[14] > mid_row[0]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SimConfig(filter_tau_s=0.5)
        with pytest.raises(ValueError):
            SimConfig(filter_tau_s=25.0)
        with pytest.raises(ValueError):
            SimConfig(sensitivity_map=np.full((32, 52), 1.5))
        with pytest.raises(ValueError):
            SimConfig(noise_std_map=np.full((32, 52), -1.0))
        with pytest.raises(ValueError):
            SimConfig(noise_std_map=np.zeros((3, 3)))


class TestFootprint:
    def test_ten_microliter_drop_covers_one_cell(self):
        _, footprint = drop_field(DeviceProfile(), TAP_WATER, (16, 26), 10.0)
        assert footprint.sum() == 1
        assert footprint[16, 26]

    def test_footprint_monotone_in_volume(self):
        counts = []
        for volume in (5, 10, 25, 50, 100, 200, 500, 1000):
            _, fp = drop_field(DeviceProfile(), TAP_WATER, CENTER, volume)
            counts.append(int(fp.sum()))
        assert counts == sorted(counts)
        assert counts[-1] > counts[0]

    def test_footprint_nonincreasing_in_surface_tension(self):
        counts = []
        for gamma in (20.0, 30.0, 50.0, 72.0):
            liq = VirtualLiquid(sigma=1e-4, eps_r=50.0, surface_tension_mN_m=gamma)
            _, fp = drop_field(DeviceProfile(), liq, CENTER, 200.0)
            counts.append(int(fp.sum()))
        assert counts == sorted(counts, reverse=True)

    def test_alcohol_spreads_wider_than_water(self):
        assert contact_radius_cells(500, IPA.surface_tension_mN_m) > contact_radius_cells(
            500, TAP_WATER.surface_tension_mN_m
        )

    def test_volume_response_plateau(self):
        assert volume_response(500.0) == pytest.approx(0.95)
        assert volume_response(1000.0) < 1.05 * volume_response(500.0)
        values = [volume_response(v) for v in (10, 25, 50, 100, 500)]
        assert values == sorted(values)


class TestDepositDrop:
    def test_tap_water_500ul_reads_minus_200(self):
        controller = VirtualController(clean_config())
        controller.start_session()
        controller.step(2)
        controller.deposit_drop(TAP_WATER, CENTER, 500.0)
        controller.step(1)
        session = controller.end_session()
        reading = sample_delta(session, 2).grid[16, 26]
        assert reading == pytest.approx(-200.0, rel=0.05)

    def test_out_of_bounds_rejected(self):
        controller = VirtualController(clean_config())
        with pytest.raises(ValueError):
            controller.deposit_drop(TAP_WATER, (40.0, 26.0), 100.0)

    def test_superposition_of_disjoint_drops(self):
        config = clean_config()
        both = VirtualController(config)
        both.deposit_drop(TAP_WATER, (8.0, 10.0), 200.0)
        both.deposit_drop(TAP_WATER, (24.0, 40.0), 200.0)
        one = VirtualController(config)
        one.deposit_drop(TAP_WATER, (8.0, 10.0), 200.0)
        other = VirtualController(config)
        other.deposit_drop(TAP_WATER, (24.0, 40.0), 200.0)
        np.testing.assert_allclose(
            both.true_field, one.true_field + other.true_field, atol=1e-12
        )


class TestDrawUp:
    def test_priming_leaves_400_unit_stuck_region(self):
        # slowest re-adaptation keeps the baseline nearly frozen while priming
        controller = VirtualController(clean_config(filter_tau_s=20.0))
        controller.start_session()
        controller.step(1)
        controller.prime(CENTER, TAP_WATER, 500.0)
        controller.step(3)
        session = controller.end_session()
        stuck = sample_delta(session, len(session) - 1).grid[16, 26]
        assert stuck == pytest.approx(400.0, rel=0.1)
        assert not controller.filter_active

    def test_draw_up_requires_a_present_drop(self):
        controller = VirtualController(clean_config())
        drop = controller.deposit_drop(TAP_WATER, CENTER, 500.0)
        film = controller.draw_up(drop)
        with pytest.raises(ValueError):
            controller.draw_up(film)  # kind mismatch
        with pytest.raises(ValueError):
            controller.draw_up(drop)  # no longer present

    def test_drop_after_priming_persists(self):
        controller = VirtualController(clean_config())
        controller.prime((8.0, 10.0))
        controller.start_session()
        controller.step(1)
        controller.deposit_drop(DI_WATER, (24.0, 40.0), 500.0)
        frames = controller.step(40)
        first = frames[0].grid[24, 40]
        last = frames[-1].grid[24, 40]
        assert first < -50
        assert last == pytest.approx(first, rel=1e-9)  # no decay with the filter off

    def test_removing_film_restores_filter(self):
        controller = VirtualController(clean_config())
        film = controller.prime(CENTER)
        assert not controller.filter_active
        controller.remove_sample(film)
        assert controller.filter_active


class TestPlaceContainer:
    def steady_container_frame(self, liquid=TAP_WATER, radius=6.0, base_kind="plastic-cup"):
        controller = VirtualController(clean_config(filter_enabled=False))
        controller.start_session()
        controller.step(1)
        controller.place_container(liquid, CENTER, radius, base_kind)
        controller.step(2)
        session = controller.end_session()
        return sample_delta(session, len(session) - 1)

    def test_rim_reads_positive(self):
        frame = self.steady_container_frame()
        feats = container_features(frame)
        assert feats.present and feats.positive_mean > 0

    def test_interior_reads_negative(self):
        frame = self.steady_container_frame()
        interior = frame.grid[14:19, 24:29]
        assert interior.mean() < 0

    def test_rim_mean_tracks_base_kind_not_size_or_volume(self):
        cup_small = container_features(self.steady_container_frame(radius=5.0))
        cup_large = container_features(self.steady_container_frame(radius=8.0))
        assert cup_small.positive_mean == pytest.approx(cup_large.positive_mean, rel=0.01)
        vial = container_features(self.steady_container_frame(radius=5.0, base_kind="vial"))
        expected_ratio = 0.65 / 1.0
        assert vial.positive_mean / cup_small.positive_mean == pytest.approx(
            expected_ratio, rel=0.05
        )

    def test_ring_out_of_bounds_rejected(self):
        controller = VirtualController(clean_config())
        with pytest.raises(ValueError):
            controller.place_container(TAP_WATER, (3.0, 26.0), 6.0)

    def test_unknown_base_kind_rejected(self):
        controller = VirtualController(clean_config())
        with pytest.raises(ValueError):
            controller.place_container(TAP_WATER, CENTER, 6.0, base_kind="barrel")

    def test_corner_fringing_lobes_present(self):
        frame = self.steady_container_frame(radius=6.0)
        lobe_r = (6.0 + 1.3) / np.sqrt(2)
        r, c = int(round(16 + lobe_r)), int(round(26 + lobe_r))
        assert frame.grid[r, c] < 0
        # lobes sit outside the rim
        assert np.hypot(r - 16, c - 26) > 6.0


class TestStepDynamics:
    def test_zero_noise_no_samples_gives_zero_deltas(self):
        controller = VirtualController(clean_config())
        for frame in controller.step(5):
            assert np.all(frame.grid == 0)

    def test_filter_on_decay_matches_closed_form(self):
        config = clean_config(filter_tau_s=5.0)
        controller = VirtualController(config)
        controller.deposit_drop(TAP_WATER, CENTER, 500.0)
        frames = controller.step(30)
        observed = -200.0  # steady observed reading at the centroid
        dt = config.profile.frame_period_s
        initial = frames[0].grid[16, 26]
        for k, frame in enumerate(frames, start=1):
            expected = observed * np.exp(-dt * (k - 1) / 5.0)
            assert frame.grid[16, 26] == pytest.approx(expected, rel=1e-9)
        # inside 3 tau the signal has fallen below 10% of its initial value
        three_tau_index = int(np.ceil(3 * 5.0 / dt))
        assert abs(frames[three_tau_index].grid[16, 26]) < 0.1 * abs(initial)

    def test_filter_fixed_point_reaches_noise_floor(self):
        config = SimConfig(seed=3, filter_tau_s=2.0)
        controller = VirtualController(config)
        controller.deposit_drop(TAP_WATER, CENTER, 500.0)
        controller.step(60)  # ~18 tau
        tail = controller.step(40)
        centroid = np.array([f.grid[16, 26] for f in tail])
        noise_std = config.resolved_noise()[16, 26]
        assert np.abs(centroid).mean() < 2 * noise_std

    def test_post_priming_stability_over_ten_minutes(self):
        controller = VirtualController(SimConfig(seed=4))
        controller.prime((8.0, 10.0))
        controller.start_session()
        controller.step(1)
        controller.deposit_drop(TAP_WATER, (16.0, 13.0), 500.0)
        frames = controller.step(1000)  # 600 s at 0.6 s/frame
        centroid = np.array([f.grid[16, 13] for f in frames])
        assert centroid.std(ddof=1) <= 10.0
        drift = abs(centroid[:100].mean() - centroid[-100:].mean())
        assert drift < 5.0

    def test_saturation_bounds_every_emitted_value(self):
        config = SimConfig(seed=5, saturation=800.0)
        controller = VirtualController(config)
        salty = VirtualLiquid(sigma=0.5, eps_r=80.0, surface_tension_mN_m=72.0)
        for _ in range(3):
            controller.deposit_drop(salty, CENTER, 500.0)
        for frame in controller.step(5):
            assert np.all(np.abs(frame.grid) <= 800.0)

    def test_deterministic_streams(self):
        config = SimConfig(seed=11)
        runs = []
        for _ in range(2):
            controller = VirtualController(config)
            controller.deposit_drop(TAP_WATER, CENTER, 300.0)
            runs.append(np.stack([f.grid for f in controller.step(10)]))
        np.testing.assert_array_equal(runs[0], runs[1])


class TestGenerateDataset:
    def test_counts_and_metadata(self):
        sessions = generate_dataset(
            SimConfig(seed=6),
            [ClassSpec("base", DI_WATER), ClassSpec("spiked", IPA)],
            drops_per_class=3,
            frames_per_drop=10,
        )
        assert len(sessions) == 6
        labels = [s.metadata["class"] for s in sessions]
        assert labels == ["base"] * 3 + ["spiked"] * 3
        for session in sessions:
            assert len(session) >= 10
            assert session.metadata["deposit_frame_index"] == 3

    def test_fixed_seed_is_byte_identical(self):
        spec = [ClassSpec("a", DI_WATER), ClassSpec("b", IPA)]
        first = generate_dataset(SimConfig(seed=7), spec, 2, 5)
        second = generate_dataset(SimConfig(seed=7), spec, 2, 5)
        for s1, s2 in zip(first, second):
            assert dumps_canonical(session_to_dict(s1)) == dumps_canonical(
                session_to_dict(s2)
            )

    def test_needs_two_classes(self):
        with pytest.raises(ValueError):
            generate_dataset(SimConfig(), [ClassSpec("only", DI_WATER)], 2, 5)


class TestScenario:
    def script(self):
        return {
            "seed": 9,
            "filter_tau_s": 5.0,
            "metadata": {"class": "demo"},
            "operations": [
                {"op": "wait", "frames": 2},
                {"op": "deposit", "liquid": "tap-water", "center": [8, 10], "volume_ul": 500},
                {"op": "wait", "frames": 2},
                {"op": "draw_up"},
                {"op": "wait", "frames": 3},
                {"op": "deposit", "liquid": "di-water", "center": [16, 26], "volume_ul": 500},
                {"op": "wait", "frames": 10},
            ],
        }

    def test_scenario_produces_session(self):
        session = run_scenario(self.script())
        assert len(session) == 17
        assert session.metadata == {"class": "demo"}
        # the test drop is present in the late frames
        late = sample_delta(session, len(session) - 1).grid
        assert late[16, 26] < -50

    def test_scenario_is_deterministic(self):
        a = run_scenario(self.script())
        b = run_scenario(self.script())
        assert dumps_canonical(session_to_dict(a)) == dumps_canonical(session_to_dict(b))

    def test_custom_liquid_object(self):
        script = self.script()
        script["operations"][1]["liquid"] = {
            "sigma": 0.01,
            "eps_r": 60.0,
            "surface_tension_mN_m": 50.0,
            "name": "custom",
        }
        session = run_scenario(script)
        assert len(session) == 17

    def test_bad_scripts_raise_schema_errors(self):
        with pytest.raises(SchemaError):
            run_scenario({"operations": []})
        with pytest.raises(SchemaError):
            run_scenario({"operations": [{"op": "explode"}]})
        with pytest.raises(SchemaError):
            run_scenario({"operations": [{"op": "draw_up"}]})
        with pytest.raises(SchemaError):
            run_scenario(
                {"operations": [{"op": "deposit", "liquid": "lava", "center": [1, 1]}]}
            )
