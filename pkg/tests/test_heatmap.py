import numpy as np
import pytest

import oracles
from conftest import make_session
from liqsense.errors import DimensionError
from liqsense.heatmap import (
    DeviceProfile,
    Frame,
    Session,
    per_pixel_std,
    reconstruct_measured,
    sample_delta,
    temporal_average,
)


class TestDeviceProfile:
    def test_defaults_match_device(self):
        p = DeviceProfile()
        assert (p.rows, p.cols) == (32, 52)
        assert p.pitch_mm == 4.2
        assert p.frame_period_s == 0.6
        assert p.drive_freq_hz == 1e5
        assert p.omega_rad_s == pytest.approx(2 * np.pi * 1e5)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"rows": 0},
            {"cols": -1},
            {"pitch_mm": 0},
            {"frame_period_s": -0.1},
            {"drive_freq_hz": 0},
            {"sign_convention": "direct"},
        ],
    )
    def test_invalid_profiles_rejected(self, kwargs):
        with pytest.raises(ValueError):
            DeviceProfile(**kwargs)


class TestFrameAndSession:
    def test_non_finite_grid_rejected(self):
        with pytest.raises(ValueError):
            Frame(grid=np.array([[1.0, np.nan]]))

    def test_dimension_mismatch_rejected(self):
        p = DeviceProfile(rows=2, cols=2)
        ref = Frame(grid=np.zeros((2, 2)))
        bad = Frame(grid=np.zeros((2, 3)), timestamp_s=1.0)
        with pytest.raises(DimensionError):
            Session(profile=p, reference=ref, deltas=[bad])

    def test_timestamps_must_increase(self):
        p = DeviceProfile(rows=2, cols=2)
        ref = Frame(grid=np.zeros((2, 2)))
        frames = [Frame(grid=np.zeros((2, 2)), timestamp_s=t) for t in (1.0, 1.0)]
        with pytest.raises(ValueError):
            Session(profile=p, reference=ref, deltas=frames)


class TestReconstructMeasured:
    def test_zero_reference_returns_delta(self):
        deltas = [np.full((3, 4), -7.5)]
        session = make_session(np.zeros((3, 4)), deltas)
        out = reconstruct_measured(session, 0)
        assert np.array_equal(out.grid, deltas[0])
        assert out.timestamp_s == session.deltas[0].timestamp_s

    def test_constant_arithmetic(self):
        session = make_session(np.full((3, 4), 100.0), [np.full((3, 4), -30.0)])
        assert np.array_equal(reconstruct_measured(session, 0).grid, np.full((3, 4), 70.0))

    def test_matches_scalar_loop_oracle(self, random_session):
        for n in range(len(random_session)):
            expected = oracles.add_grids(
                random_session.reference.grid.tolist(),
                random_session.deltas[n].grid.tolist(),
            )
            np.testing.assert_allclose(
                reconstruct_measured(random_session, n).grid, expected, rtol=0, atol=0
            )

    def test_linearity(self):
        rng = np.random.default_rng(7)
        ref = rng.normal(size=(5, 6))
        d1, d2 = rng.normal(size=(5, 6)), rng.normal(size=(5, 6))
        a, b = 2.5, -1.25
        lhs = reconstruct_measured(make_session(ref, [a * d1 + b * d2]), 0).grid
        zero = np.zeros((5, 6))
        rhs = (
            a * reconstruct_measured(make_session(zero, [d1]), 0).grid
            + b * reconstruct_measured(make_session(zero, [d2]), 0).grid
            + ref
        )
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_index_out_of_range(self, random_session):
        with pytest.raises(IndexError):
            reconstruct_measured(random_session, len(random_session))
        with pytest.raises(IndexError):
            reconstruct_measured(random_session, -1)


class TestSampleDelta:
    def test_first_frame_is_zero(self, random_session):
        assert np.all(sample_delta(random_session, 0).grid == 0)

    def test_identical_deltas_give_zero(self):
        delta = np.full((3, 3), 4.0)
        session = make_session(np.ones((3, 3)), [delta.copy() for _ in range(4)])
        for n in range(4):
            assert np.all(sample_delta(session, n).grid == 0)

    def test_matches_reconstruction_oracle(self, random_session):
        for n in range(len(random_session)):
            measured_n = oracles.add_grids(
                random_session.reference.grid.tolist(),
                random_session.deltas[n].grid.tolist(),
            )
            measured_0 = oracles.add_grids(
                random_session.reference.grid.tolist(),
                random_session.deltas[0].grid.tolist(),
            )
            expected = oracles.subtract_grids(measured_n.tolist(), measured_0.tolist())
            np.testing.assert_allclose(
                sample_delta(random_session, n).grid, expected, atol=1e-12
            )

    def test_index_out_of_range(self, random_session):
        with pytest.raises(IndexError):
            sample_delta(random_session, 99)


class TestTemporalAverage:
    def test_mean_of_identical_frames(self):
        frames = [Frame(grid=np.full((2, 2), 3.0), timestamp_s=t) for t in (0, 1, 2)]
        out = temporal_average(frames, 3)
        assert np.array_equal(out.grid, np.full((2, 2), 3.0))
        assert out.timestamp_s == 2

    def test_two_frame_mean(self):
        frames = [
            Frame(grid=np.zeros((2, 2)), timestamp_s=0),
            Frame(grid=np.full((2, 2), 10.0), timestamp_s=1),
        ]
        assert np.array_equal(temporal_average(frames, 2).grid, np.full((2, 2), 5.0))

    def test_window_one_is_identity_on_last(self):
        rng = np.random.default_rng(3)
        frames = [Frame(grid=rng.normal(size=(4, 4)), timestamp_s=t) for t in range(5)]
        assert np.array_equal(temporal_average(frames, 1).grid, frames[-1].grid)

    def test_noise_scales_like_inverse_sqrt_n(self):
        # 10,000 Monte-Carlo cells: each grid cell is an independent trial
        rng = np.random.default_rng(11)
        frames = [
            Frame(grid=rng.normal(0, 8.0, (100, 100)), timestamp_s=t) for t in range(20)
        ]
        averaged = temporal_average(frames, 20)
        assert averaged.grid.std() == pytest.approx(8.0 / np.sqrt(20), rel=0.15)

    def test_variance_converges_to_v_over_n(self):
        rng = np.random.default_rng(13)
        v = 25.0
        for n in (2, 5, 10):
            frames = [
                Frame(grid=rng.normal(0, np.sqrt(v), (80, 80)), timestamp_s=t)
                for t in range(n)
            ]
            observed = temporal_average(frames, n).grid.var()
            assert observed == pytest.approx(v / n, rel=0.15)

    def test_errors(self):
        with pytest.raises(ValueError):
            temporal_average([], 1)
        frames = [Frame(grid=np.zeros((2, 2)), timestamp_s=0)]
        with pytest.raises(ValueError):
            temporal_average(frames, 2)


class TestPerPixelStd:
    def test_identical_frames_give_zero(self):
        frames = [Frame(grid=np.full((3, 3), 9.0), timestamp_s=t) for t in range(4)]
        assert np.all(per_pixel_std(frames).grid == 0)

    def test_two_point_sample_std(self):
        a = np.zeros((3, 3))
        b = np.zeros((3, 3))
        b[1, 2] = 2.0
        frames = [Frame(grid=a, timestamp_s=0), Frame(grid=b, timestamp_s=1)]
        out = per_pixel_std(frames).grid
        assert out[1, 2] == pytest.approx(np.sqrt(2))
        out[1, 2] = 0
        assert np.all(out == 0)

    def test_matches_scalar_loop_oracle(self):
        rng = np.random.default_rng(17)
        grids = [rng.normal(size=(6, 7)) for _ in range(5)]
        frames = [Frame(grid=g, timestamp_s=t) for t, g in enumerate(grids)]
        expected = oracles.sample_std_stack([g.tolist() for g in grids])
        np.testing.assert_allclose(per_pixel_std(frames).grid, expected, atol=1e-12)

    def test_needs_two_frames(self):
        with pytest.raises(ValueError):
            per_pixel_std([Frame(grid=np.zeros((2, 2)))])
