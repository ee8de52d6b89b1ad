"""Truth trajectories, sensor models, dead reckoning, and corrections."""

import numpy as np
import pytest

from gravmatch.errors import LengthMismatchError
from gravmatch.insmodel import (
    NavLog,
    SegmentBuffers,
    SensorConfig,
    TruthState,
    apply_correction,
    dead_reckon,
    measure_gravity,
    measure_velocity,
    simulate_truth,
)

from conftest import map_from_grid

STEP_SCALE = 12.0 / 3600.0


class TestSimulateTruth:
    def test_per_step_displacement_along_single_leg(self):
        states = simulate_truth([(0.0, 0.0), (1.0, 0.0)], 7.54, 12.0)
        step = 7.54 * STEP_SCALE
        assert states[1].lon - states[0].lon == pytest.approx(step, abs=1e-15)
        assert states[1].lat == 0.0
        assert states[0].velocity == (7.54, 0.0)

    def test_full_leg_ends_within_one_step_of_endpoint(self):
        states = simulate_truth([(0.0, 0.0), (1.0, 0.0)], 7.54, 12.0)
        final = np.array(states[-1].position)
        assert np.hypot(*(final - [1.0, 0.0])) < 7.54 * STEP_SCALE
        assert final[0] <= 1.0

    def test_perpendicular_legs_turn_exactly_once_at_waypoint(self):
        # Speed 7.5 deg/h at 12 s steps moves 0.025 deg/step, so the first
        # 0.1-deg leg takes exactly 4 steps and the turn lands on the corner.
        states = simulate_truth([(0.0, 0.0), (0.1, 0.0), (0.1, 0.1)], 7.5, 12.0)
        velocities = [s.velocity for s in states]
        changes = [
            i for i in range(1, len(velocities)) if velocities[i] != velocities[i - 1]
        ]
        assert changes == [4]
        assert states[4].position == pytest.approx((0.1, 0.0), abs=1e-12)
        assert velocities[3] == (7.5, 0.0)
        assert velocities[4] == (0.0, 7.5)

    def test_step_count_covers_route_length(self):
        states = simulate_truth([(0.0, 0.0), (0.1, 0.0)], 7.5, 12.0)
        assert len(states) == 5  # arc lengths 0, 0.025, ..., 0.1

    def test_bad_inputs_rejected(self):
        with pytest.raises(ValueError):
            simulate_truth([(0.0, 0.0)], 7.5, 12.0)
        with pytest.raises(ValueError):
            simulate_truth([(0.0, 0.0), (1.0, 0.0)], 0.0, 12.0)
        with pytest.raises(ValueError):
            simulate_truth([(0.0, 0.0), (0.0, 0.0), (1.0, 0.0)], 7.5, 12.0)


class TestMeasureVelocity:
    def test_noiseless_returns_truth(self):
        state = TruthState(0.0, 0.0, 7.54, 0.0)
        cfg = SensorConfig()
        rng = np.random.default_rng(0)
        assert measure_velocity(state, cfg, rng) == (7.54, 0.0)

    def test_pure_bias_shifts_reading(self):
        state = TruthState(0.0, 0.0, 7.54, 0.0)
        cfg = SensorConfig(bias_lon=1.0, bias_lat=0.0)
        rng = np.random.default_rng(0)
        assert measure_velocity(state, cfg, rng) == (8.54, 0.0)

    def test_noise_mean_matches_truth_plus_bias(self):
        state = TruthState(0.0, 0.0, 7.54, 0.0)
        cfg = SensorConfig(bias_lon=1.0, sigma_v=9e-6)
        rng = np.random.default_rng(123)
        draws = np.array([measure_velocity(state, cfg, rng) for _ in range(100_000)])
        sigma_hr = 9e-6 * 3600.0
        ci = 4.0 * sigma_hr / np.sqrt(100_000)
        assert abs(draws[:, 0].mean() - 8.54) < ci
        assert abs(draws[:, 1].mean() - 0.0) < ci

    def test_negative_noise_rejected(self):
        with pytest.raises(ValueError):
            SensorConfig(sigma_v=-1.0)
        with pytest.raises(ValueError):
            SensorConfig(dt_s=0.0)


class TestMeasureGravity:
    def test_noiseless_equals_map_value_at_truth_cell(self):
        values = np.zeros((4, 4))
        values[2][1] = 7.5
        grav_map = map_from_grid(values)
        rng = np.random.default_rng(0)
        assert measure_gravity(grav_map, (0.011, 0.021), 0.0, rng) == 7.5

    def test_noise_std_matches_sigma(self):
        grav_map = map_from_grid(np.zeros((3, 3)))
        rng = np.random.default_rng(7)
        residuals = np.array(
            [measure_gravity(grav_map, (0.01, 0.01), 1.0, rng) for _ in range(100_000)]
        )
        assert 0.97 < residuals.std() < 1.03

    def test_two_mgal_noise_supported(self):
        grav_map = map_from_grid(np.zeros((3, 3)))
        rng = np.random.default_rng(7)
        value = measure_gravity(grav_map, (0.01, 0.01), 2.0, rng)
        assert np.isfinite(value)


class TestDeadReckon:
    def test_single_step(self):
        out = dead_reckon((0.0, 0.0), [(1.0, 0.0)], 12.0)
        assert out.shape == (1, 2)
        assert out[0][0] == pytest.approx(12.0 / 3600.0, abs=1e-15)
        assert out[0][1] == 0.0

    def test_zero_velocity_stays_at_anchor(self):
        out = dead_reckon((3.5, -1.25), np.zeros((6, 2)), 12.0)
        assert np.array_equal(out, np.tile([3.5, -1.25], (6, 1)))

    def test_constant_bias_drifts_one_degree_per_hour(self):
        out = dead_reckon((0.0, 0.0), np.tile([1.0, 0.0], (300, 1)), 12.0)
        assert out[-1][0] == pytest.approx(1.0, abs=1e-9)
        assert out[-1][1] == 0.0

    def test_bad_shape_rejected(self):
        with pytest.raises(ValueError):
            dead_reckon((0.0, 0.0), np.zeros((3, 3)), 12.0)


class TestSegmentBuffers:
    def test_push_and_arrays(self):
        buffers = SegmentBuffers()
        buffers.push(1.5, (7.5, 0.0), (0.1, 0.2))
        buffers.push(2.5, (0.0, 7.5), (0.3, 0.4))
        assert len(buffers) == 2
        assert np.array_equal(buffers.z_array(), [1.5, 2.5])
        assert np.array_equal(buffers.v_array(), [[7.5, 0.0], [0.0, 7.5]])
        assert np.array_equal(buffers.s_ins_array(), [[0.1, 0.2], [0.3, 0.4]])

    def test_clear_empties_all_three_lists(self):
        buffers = SegmentBuffers()
        buffers.push(1.0, (0.0, 0.0), (0.0, 0.0))
        buffers.clear()
        assert len(buffers) == 0
        assert buffers.z == [] and buffers.v == [] and buffers.s_ins == []

    def test_mismatched_lists_rejected(self):
        with pytest.raises(LengthMismatchError):
            SegmentBuffers(z=[1.0], v=[], s_ins=[])


class TestNavLogAndCorrection:
    def test_step_advances_by_velocity(self):
        log = NavLog((0.0, 0.0), 12.0)
        pos = log.step((0.0, 0.0), (1.0, 0.0), 5.0)
        assert pos == pytest.approx((12.0 / 3600.0, 0.0), abs=1e-15)
        assert log.current == pos
        assert log.corrected == [False]

    def test_identity_correction_only_marks_steps(self):
        log = NavLog((0.0, 0.0), 12.0)
        for _ in range(2):
            log.step((0.0, 0.0), (1.0, 1.0), 0.0)
        before = log.ins_array().copy()
        apply_correction(log, before)
        assert np.array_equal(log.ins_array(), before)
        assert log.corrected == [True, True]

    def test_anchor_resets_to_corrected_endpoint(self):
        log = NavLog((0.0, 0.0), 12.0)
        log.step((0.0, 0.0), (1.0, 0.0), 0.0)
        log.step((0.0, 0.0), (1.0, 0.0), 0.0)
        apply_correction(log, np.array([[0.5, 0.5], [0.6, 0.6]]))
        nxt = log.step((0.0, 0.0), (1.0, 0.0), 0.0)
        assert nxt == pytest.approx((0.6 + 12.0 / 3600.0, 0.6), abs=1e-15)

    def test_second_segment_reckons_from_corrected_positions(self):
        # Two T=2 segments: after correcting the first, the second segment's
        # INS positions (window centers downstream) continue from the
        # corrected endpoint rather than the raw drifted track.
        log = NavLog((0.0, 0.0), 12.0)
        scale = 12.0 / 3600.0
        log.step((0.0, 0.0), (1.0, 0.0), 0.0)
        log.step((0.0, 0.0), (1.0, 0.0), 0.0)
        apply_correction(log, np.array([[0.2, 0.0], [0.21, 0.0]]))
        second = [log.step((0.0, 0.0), (3.0, 0.0), 0.0) for _ in range(2)]
        assert second[0] == pytest.approx((0.21 + 3.0 * scale, 0.0), abs=1e-15)
        assert second[1] == pytest.approx((0.21 + 6.0 * scale, 0.0), abs=1e-12)

    def test_partial_or_oversized_correction_rejected(self):
        log = NavLog((0.0, 0.0), 12.0)
        log.step((0.0, 0.0), (1.0, 0.0), 0.0)
        with pytest.raises(LengthMismatchError):
            apply_correction(log, np.zeros((2, 2)))
        apply_correction(log, np.zeros((1, 2)))
        with pytest.raises(LengthMismatchError):
            apply_correction(log, np.zeros((1, 2)))  # nothing pending anymore


class TestDriftInvariants:
    def test_noiseless_unbiased_ins_tracks_truth(self):
        # Corner at an exact step multiple: per-step velocity integration
        # only reproduces the polyline when no step straddles a waypoint.
        truth = simulate_truth([(0.2, 0.2), (0.3, 0.2), (0.3, 0.3)], 7.5, 12.0)
        log = NavLog(truth[0].position, 12.0)
        for u in range(len(truth) - 1):
            log.step(truth[u + 1].position, truth[u].velocity, 0.0)
        gap = np.abs(log.ins_array() - log.truth_array())
        assert gap.max() < 1e-9

    def test_pure_bias_error_grows_linearly(self):
        truth = simulate_truth([(0.0, 0.0), (1.0, 0.0)], 7.5, 12.0)
        bias = np.array([1.0, 0.0])
        log = NavLog(truth[0].position, 12.0)
        for u in range(len(truth) - 1):
            v = np.array(truth[u].velocity) + bias
            log.step(truth[u + 1].position, tuple(v), 0.0)
        drift = np.linalg.norm(log.ins_array() - log.truth_array(), axis=1)
        steps = np.arange(1, len(drift) + 1)
        expected = np.linalg.norm(bias) * steps * 12.0 / 3600.0
        assert np.allclose(drift, expected, atol=1e-9)

    def test_same_seed_reproduces_measurements(self):
        state = TruthState(0.0, 0.0, 7.54, 0.0)
        cfg = SensorConfig(bias_lon=1.0, sigma_v=9e-6, sigma_z=1.0)
        grav_map = map_from_grid(np.zeros((3, 3)))
        first = [
            (
                measure_velocity(state, cfg, rng),
                measure_gravity(grav_map, (0.01, 0.01), cfg.sigma_z, rng),
            )
            for rng in [np.random.default_rng(42)]
            for _ in range(5)
        ]
        rng = np.random.default_rng(42)
        second = [
            (
                measure_velocity(state, cfg, rng),
                measure_gravity(grav_map, (0.01, 0.01), cfg.sigma_z, rng),
            )
            for _ in range(5)
        ]
        assert first == second
