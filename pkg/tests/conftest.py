"""Shared builders for maps, windows, and matcher instances."""

from __future__ import annotations

import numpy as np
import pytest

from gravmatch.insmodel import SegmentBuffers
from gravmatch.mapgrid import GravityMap, build_window
from gravmatch.matcher import MatchConfig

# Half the diagonal of one o=5 sub-cell at 0.01 deg resolution, in km: the
# worst-case distance from a point to its nearest sub-cell center.
KM_PER_DEG = np.pi * 6371.0 / 180.0
HALF_SUBCELL_DIAG_KM = 0.5 * float(np.hypot(0.002, 0.002)) * KM_PER_DEG


def map_from_grid(values, origin_lon=0.0, origin_lat=0.0, res_lon=0.01, res_lat=0.01):
    """GravityMap from a plain nested list or array of cell values."""
    return GravityMap(origin_lon, origin_lat, res_lon, res_lat, np.asarray(values, dtype=np.float64))


def window_from_grid(values, n=None, time_index=1):
    """A window covering the whole given grid, centered on its middle cell."""
    grav_map = map_from_grid(values)
    size = grav_map.nrows
    if n is None:
        n = size
    center = ((size - 1) // 2) * 0.01
    return build_window(grav_map, center, center, n, time_index=time_index)


def distinct_map(ncols, nrows=40, origin_lon=0.0, origin_lat=0.3, res=0.01):
    """Map whose values are distinct within any 13x13 window, gaps >= 1 mGal.

    values(r, c) = (r mod 31)*31 + (c mod 31) + base: two cells share a value
    only when both indices agree mod 31, impossible inside a window narrower
    than 31 cells.  Exact measurements therefore pin down the true cell.
    """
    r = np.arange(nrows)[:, None]
    c = np.arange(ncols)[None, :]
    vals = (r % 31) * 31.0 + (c % 31) + 9.79e5
    return GravityMap(origin_lon, origin_lat, res, res, vals)


def random_instance(seed, n=3, T=4, o=1, alpha=0.0, sigma_z=1.0, sigma_v=2e-4):
    """One segment-matching problem on a random map: (windows, buffers, cfg).

    The INS track drifts from the map center by up to one cell per step, so
    every window stays inside the map; measurements are independent of the
    map so instances exercise generic score landscapes.
    """
    rng = np.random.default_rng(seed)
    cfg = MatchConfig(T=T, n=n, o=o, alpha=alpha, sigma_z=sigma_z, sigma_v=sigma_v, dt_s=12.0)
    size = n + 16
    grav_map = GravityMap(0.0, 0.0, 0.01, 0.01, rng.normal(0.0, 5.0, size=(size, size)))
    buffers = SegmentBuffers()
    windows = []
    pos = np.array([0.01 * (size // 2)] * 2) + rng.uniform(-0.004, 0.004, size=2)
    for t in range(T):
        velocity = rng.uniform(-3.0, 3.0, size=2)
        buffers.push(float(rng.normal(0.0, 5.0)), tuple(velocity), tuple(pos))
        windows.append(build_window(grav_map, pos[0], pos[1], n, time_index=t + 1))
        pos = pos + velocity * (12.0 / 3600.0)
    return windows, buffers, cfg


@pytest.fixture
def tmp_text(tmp_path):
    """Write text to a temp file and return its path."""

    def _write(name, text):
        path = tmp_path / name
        path.write_text(text)
        return str(path)

    return _write
