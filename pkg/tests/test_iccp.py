"""Contour extraction, closest-point queries, rigid fitting, and the
contour-alignment matcher."""

import numpy as np
import pytest

from gravmatch.errors import DegenerateGeometryError, NoContourError
from gravmatch.iccp import (
    RigidTransform,
    closest_points,
    extract_contour,
    fit_rigid,
    iccp_match,
)
from gravmatch.insmodel import SegmentBuffers
from gravmatch.mapgrid import build_window
from gravmatch.matcher import MatchConfig

from conftest import map_from_grid


def _full_window(values):
    grav_map = map_from_grid(values)
    center = ((grav_map.nrows - 1) // 2) * 0.01
    return build_window(grav_map, center, center, grav_map.nrows)


def _segment_in(segments, a, b, tol=1e-12):
    """True if (a, b) or (b, a) appears among the (K, 2, 2) segments."""
    pts = np.asarray([a, b])
    for seg in segments:
        if np.allclose(seg, pts, atol=tol) or np.allclose(seg, pts[::-1], atol=tol):
            return True
    return False


class TestExtractContour:
    def test_linear_east_field_gives_vertical_contour(self):
        # Columns valued 0, 1, 2; level 0.5 crosses midway between the first
        # two columns, at lon 0.005, on every row.
        window = _full_window(np.tile([0.0, 1.0, 2.0], (3, 1)))
        segments = extract_contour(window, 0.5)
        assert segments.shape == (2, 2, 2)
        assert np.allclose(segments[..., 0], 0.005, atol=1e-12)
        assert _segment_in(segments, (0.005, 0.0), (0.005, 0.01))
        assert _segment_in(segments, (0.005, 0.01), (0.005, 0.02))

    def test_level_below_window_minimum_is_empty(self):
        window = _full_window(np.tile([0.0, 1.0, 2.0], (3, 1)))
        segments = extract_contour(window, -1.0)
        assert segments.shape == (0, 2, 2)

    def test_interpolation_tracks_level_fraction(self):
        window = _full_window(np.tile([0.0, 1.0, 2.0], (3, 1)))
        segments = extract_contour(window, 0.25)
        assert np.allclose(segments[..., 0], 0.0025, atol=1e-12)

    def test_saddle_with_center_above_separates_low_corners(self):
        # Alternating 0/1 checkerboard: every 2x2 block is a saddle whose
        # corner average equals the 0.5 level, classed as center-above.  For
        # the bottom-left block (low corners bottom-left and top-right) the
        # crossings pair left-with-bottom and right-with-top.
        window = _full_window([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
        segments = extract_contour(window, 0.5)
        assert segments.shape == (8, 2, 2)
        assert _segment_in(segments, (0.0, 0.005), (0.005, 0.0))
        assert _segment_in(segments, (0.01, 0.005), (0.005, 0.01))

    def test_saddle_with_other_diagonal_pairs_the_other_way(self):
        # Inverted checkerboard: the bottom-left block's low corners move to
        # bottom-right and top-left, so the pairing flips.
        window = _full_window([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]])
        segments = extract_contour(window, 0.5)
        assert segments.shape == (8, 2, 2)
        assert _segment_in(segments, (0.005, 0.0), (0.01, 0.005))
        assert _segment_in(segments, (0.005, 0.01), (0.0, 0.005))

    def test_every_segment_point_interpolates_to_the_level(self):
        rng = np.random.default_rng(4)
        window = _full_window(rng.normal(0.0, 2.0, size=(7, 7)))
        level = 0.3
        segments = extract_contour(window, level)
        assert len(segments) > 0
        values = window.grid_values()
        for seg in segments.reshape(-1, 2):
            col = seg[0] / 0.01
            row = seg[1] / 0.01
            # Each crossing lies on a lattice edge; interpolate along it.
            if abs(col - round(col)) < 1e-9:
                c = int(round(col))
                r0 = int(np.floor(row))
                frac = row - r0
                v = values[r0, c] * (1 - frac) + values[min(r0 + 1, 6), c] * frac
            else:
                r = int(round(row))
                c0 = int(np.floor(col))
                frac = col - c0
                v = values[r, c0] * (1 - frac) + values[r, min(c0 + 1, 6)] * frac
            assert v == pytest.approx(level, abs=1e-6)


class TestClosestPoints:
    def test_point_on_contour_maps_to_itself(self):
        segs = np.array([[[0.005, 0.0], [0.005, 0.02]]])
        out = closest_points(np.array([[0.005, 0.01]]), [segs])
        assert out[0] == pytest.approx([0.005, 0.01], abs=1e-15)

    def test_perpendicular_foot_on_vertical_contour(self):
        segs = np.array([[[0.01, -0.01], [0.01, 0.01]]])
        out = closest_points(np.array([[0.0, 0.0]]), [segs])
        assert out[0] == pytest.approx([0.01, 0.0], abs=1e-15)

    def test_query_beyond_segment_end_clamps_to_endpoint(self):
        segs = np.array([[[0.005, 0.0], [0.005, 0.02]]])
        out = closest_points(np.array([[0.03, 0.05]]), [segs])
        assert out[0] == pytest.approx([0.005, 0.02], abs=1e-15)

    def test_picks_nearest_among_multiple_segments(self):
        segs = np.array(
            [[[0.0, 0.0], [0.0, 0.01]], [[0.1, 0.0], [0.1, 0.01]]]
        )
        out = closest_points(np.array([[0.09, 0.005]]), [segs])
        assert out[0] == pytest.approx([0.1, 0.005], abs=1e-15)

    def test_empty_contour_raises_with_step_number(self):
        segs = np.array([[[0.0, 0.0], [0.0, 0.01]]])
        empty = np.empty((0, 2, 2))
        with pytest.raises(NoContourError, match="step 2"):
            closest_points(np.zeros((2, 2)), [segs, empty])


class TestFitRigid:
    def test_pure_shift(self):
        src = np.array([[0.0, 0.0], [1.0, 0.0]])
        dst = np.array([[0.0, 1.0], [1.0, 1.0]])
        transform = fit_rigid(src, dst)
        assert transform.theta == pytest.approx(0.0, abs=1e-12)
        assert (transform.t_lon, transform.t_lat) == pytest.approx((0.0, 1.0), abs=1e-12)

    def test_pure_quarter_rotation(self):
        src = np.array([[1.0, 0.0], [-1.0, 0.0]])
        dst = np.array([[0.0, 1.0], [0.0, -1.0]])
        transform = fit_rigid(src, dst)
        assert transform.theta == pytest.approx(np.pi / 2, abs=1e-12)
        assert (transform.t_lon, transform.t_lat) == pytest.approx((0.0, 0.0), abs=1e-12)

    def test_recovers_known_transform_from_jittered_points(self):
        rng = np.random.default_rng(5)
        src = rng.uniform(-1.0, 1.0, size=(5, 2))
        true = RigidTransform(theta=0.3, t_lon=0.02, t_lat=-0.05)
        dst = true.apply(src) + rng.normal(0.0, 1e-9, size=(5, 2))
        fitted = fit_rigid(src, dst)
        assert fitted.theta == pytest.approx(0.3, abs=1e-6)
        assert fitted.t_lon == pytest.approx(0.02, abs=1e-6)
        assert fitted.t_lat == pytest.approx(-0.05, abs=1e-6)

    def test_coincident_source_points_rejected(self):
        src = np.zeros((3, 2))
        dst = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(DegenerateGeometryError):
            fit_rigid(src, dst)

    def test_mismatched_shapes_rejected(self):
        with pytest.raises(ValueError):
            fit_rigid(np.zeros((3, 2)), np.zeros((2, 2)))

    @pytest.mark.parametrize("seed", range(10))
    def test_never_worse_than_identity(self, seed):
        rng = np.random.default_rng(seed)
        src = rng.uniform(-1.0, 1.0, size=(6, 2))
        dst = rng.uniform(-1.0, 1.0, size=(6, 2))
        fitted = fit_rigid(src, dst)
        fit_resid = np.sum((fitted.apply(src) - dst) ** 2)
        identity_resid = np.sum((src - dst) ** 2)
        assert fit_resid <= identity_resid + 1e-12

    @pytest.mark.parametrize("seed", range(5))
    def test_apply_then_inverse_is_identity(self, seed):
        rng = np.random.default_rng(seed)
        transform = RigidTransform(
            theta=float(rng.uniform(-3.0, 3.0)),
            t_lon=float(rng.uniform(-1.0, 1.0)),
            t_lat=float(rng.uniform(-1.0, 1.0)),
        )
        pts = rng.uniform(-1.0, 1.0, size=(7, 2))
        back = transform.inverse().apply(transform.apply(pts))
        assert np.allclose(back, pts, atol=1e-12)


def _column_map(ncols=100, nrows=100, offset=0.0):
    """Map whose cell value equals its column index plus a constant."""
    values = np.tile(np.arange(ncols, dtype=np.float64) + offset, (nrows, 1))
    return map_from_grid(values)


def _buffers_at(positions, zs, v=(0.0, 7.5)):
    buffers = SegmentBuffers()
    for pos, z in zip(positions, zs):
        buffers.push(z, v, pos)
    return buffers


class TestIccpMatch:
    def test_trajectory_on_contours_is_a_fixed_point(self):
        grav_map = _column_map()
        lats = [0.40 + 0.01 * t for t in range(5)]
        traj = [(0.355, lat) for lat in lats]
        buffers = _buffers_at(traj, [35.5] * 5)
        cfg = MatchConfig(T=5, n=13)
        history = []
        path = iccp_match(buffers, grav_map, cfg, history=history)
        assert len(history) == 1
        assert history[0] <= 1e-12
        assert np.allclose(path.positions(), traj, atol=1e-12)

    def test_recovers_pure_translation_offset(self):
        # The level 35.5 pins a vertical contour at lon 0.355; an INS track
        # offset 0.03 deg east must slide back onto it.
        grav_map = _column_map()
        lats = [0.40 + 0.01 * t for t in range(5)]
        ins = [(0.385, lat) for lat in lats]
        buffers = _buffers_at(ins, [35.5] * 5)
        cfg = MatchConfig(T=5, n=13)
        path = iccp_match(buffers, grav_map, cfg)
        expected = np.array([(0.355, lat) for lat in lats])
        assert np.allclose(path.positions(), expected, atol=1e-6)

    def test_output_is_invariant_to_constant_field_offset(self):
        lats = [0.40 + 0.01 * t for t in range(5)]
        ins = [(0.385, lat) for lat in lats]
        base = iccp_match(
            _buffers_at(ins, [35.5] * 5), _column_map(), MatchConfig(T=5, n=13)
        )
        shifted = iccp_match(
            _buffers_at(ins, [535.5] * 5),
            _column_map(offset=500.0),
            MatchConfig(T=5, n=13),
        )
        assert np.allclose(base.positions(), shifted.positions(), atol=1e-9)

    def test_returns_one_state_per_buffered_step(self):
        grav_map = _column_map()
        ins = [(0.385, 0.40 + 0.01 * t) for t in range(4)]
        path = iccp_match(
            _buffers_at(ins, [35.5] * 4), grav_map, MatchConfig(T=4, n=13)
        )
        assert len(path.states) == 4
        assert [s.t for s in path.states] == [1, 2, 3, 4]
        assert np.isfinite(path.log_posterior)

    def test_matched_distance_history_is_non_increasing(self):
        rng = np.random.default_rng(2)
        grav_map = map_from_grid(rng.normal(0.0, 10.0, size=(80, 80)))
        truth = [(0.30 + 0.005 * t, 0.30 + 0.01 * t) for t in range(6)]
        zs = [grav_map.values[int(round(lat / 0.01)), int(round(lon / 0.01))]
              for lon, lat in truth]
        ins = [(lon + 0.012, lat - 0.007) for lon, lat in truth]
        history = []
        iccp_match(
            _buffers_at(ins, zs), grav_map, MatchConfig(T=6, n=13), history=history
        )
        assert len(history) >= 2
        for earlier, later in zip(history, history[1:]):
            assert later <= earlier + 1e-12

    def test_missing_contour_support_raises(self):
        grav_map = _column_map()
        ins = [(0.385, 0.40), (0.385, 0.41)]
        buffers = _buffers_at(ins, [35.5, 1e6])
        with pytest.raises(NoContourError):
            iccp_match(buffers, grav_map, MatchConfig(T=2, n=13))
