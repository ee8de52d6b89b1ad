"""Iso-contour closest-point matching, the classical baseline corrector.

Each buffered gravity reading defines an iso-line of the map inside its
search window.  The INS trajectory is repeatedly matched to its closest
points on those contours and moved by the best rigid (rotation plus
translation) fit until the update stalls.  Contours are extracted once per
segment and held fixed, so the matched-distance objective never increases
across iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, NoContourError
from .insmodel import SegmentBuffers
from .mapgrid import GravityMap, GridWindow, build_window, lookup
from .matcher import CandidateState, MatchConfig, PathEstimate, meas_loglik, trans_loglik

# Edge names index the sides of one 2x2 node block.
_BOTTOM, _RIGHT, _TOP, _LEFT = 0, 1, 2, 3

# Non-saddle marching-squares cases: corner-above code -> edge pairs to join.
# Corner bits: 1=bottom-left, 2=bottom-right, 4=top-right, 8=top-left.
_CASES: dict[int, list[tuple[int, int]]] = {
    1: [(_LEFT, _BOTTOM)],
    2: [(_BOTTOM, _RIGHT)],
    3: [(_LEFT, _RIGHT)],
    4: [(_RIGHT, _TOP)],
    6: [(_BOTTOM, _TOP)],
    7: [(_LEFT, _TOP)],
    8: [(_TOP, _LEFT)],
    9: [(_BOTTOM, _TOP)],
    11: [(_RIGHT, _TOP)],
    12: [(_LEFT, _RIGHT)],
    13: [(_BOTTOM, _RIGHT)],
    14: [(_LEFT, _BOTTOM)],
}


@dataclass(frozen=True)
class RigidTransform:
    """Rotation by theta about the coordinate origin followed by a translation."""

    theta: float
    t_lon: float
    t_lat: float

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        c, s = np.cos(self.theta), np.sin(self.theta)
        lon = c * pts[..., 0] - s * pts[..., 1] + self.t_lon
        lat = s * pts[..., 0] + c * pts[..., 1] + self.t_lat
        return np.stack([lon, lat], axis=-1)

    def inverse(self) -> "RigidTransform":
        c, s = np.cos(self.theta), np.sin(self.theta)
        return RigidTransform(
            theta=-self.theta,
            t_lon=-(c * self.t_lon + s * self.t_lat),
            t_lat=-(-s * self.t_lon + c * self.t_lat),
        )


def _interp(p1, v1, p2, v2, z):
    """Point on the p1-p2 edge where the linear field reaches z."""
    f = (z - v1) / (v2 - v1)
    return (p1[0] + f * (p2[0] - p1[0]), p1[1] + f * (p2[1] - p1[1]))


def extract_contour(window: GridWindow, z: float) -> np.ndarray:
    """Iso-line segments of the window's field at level z.

    Runs marching squares over the n x n cell-center nodes with linear edge
    interpolation; nodes with value exactly z count as above.  Ambiguous
    saddle blocks resolve by the average-corner rule: the block connects
    through its center when the corner mean is >= z.  Returns (K, 2, 2)
    segment endpoints; K is zero when the level crosses nothing.
    """
    vals = window.grid_values()
    n = window.n
    lons = window.positions[:n, 0]
    lats = window.positions[::n, 1]
    above = vals >= z
    segments = []
    code_grid = (
        above[:-1, :-1] * 1
        + above[:-1, 1:] * 2
        + above[1:, 1:] * 4
        + above[1:, :-1] * 8
    )
    for r, c in zip(*np.nonzero((code_grid != 0) & (code_grid != 15))):
        code = int(code_grid[r, c])
        bl = (lons[c], lats[r])
        br = (lons[c + 1], lats[r])
        tr = (lons[c + 1], lats[r + 1])
        tl = (lons[c], lats[r + 1])
        v_bl, v_br = vals[r, c], vals[r, c + 1]
        v_tr, v_tl = vals[r + 1, c + 1], vals[r + 1, c]
        crossings = {}
        if above[r, c] != above[r, c + 1]:
            crossings[_BOTTOM] = _interp(bl, v_bl, br, v_br, z)
        if above[r, c + 1] != above[r + 1, c + 1]:
            crossings[_RIGHT] = _interp(br, v_br, tr, v_tr, z)
        if above[r + 1, c] != above[r + 1, c + 1]:
            crossings[_TOP] = _interp(tl, v_tl, tr, v_tr, z)
        if above[r, c] != above[r + 1, c]:
            crossings[_LEFT] = _interp(bl, v_bl, tl, v_tl, z)
        if code in (5, 10):
            center_above = (v_bl + v_br + v_tr + v_tl) / 4.0 >= z
            if code == 5:
                pairs = (
                    [(_BOTTOM, _RIGHT), (_TOP, _LEFT)]
                    if center_above
                    else [(_LEFT, _BOTTOM), (_RIGHT, _TOP)]
                )
            else:
                pairs = (
                    [(_LEFT, _BOTTOM), (_RIGHT, _TOP)]
                    if center_above
                    else [(_BOTTOM, _RIGHT), (_TOP, _LEFT)]
                )
        else:
            pairs = _CASES[code]
        for e1, e2 in pairs:
            segments.append((crossings[e1], crossings[e2]))
    return np.asarray(segments, dtype=np.float64).reshape(-1, 2, 2)


def closest_points(traj: np.ndarray, contours: list[np.ndarray]) -> np.ndarray:
    """For each trajectory point, its nearest point on that step's contour.

    Projection onto each segment is clamped to the endpoints, so queries
    beyond a segment end snap to the nearer endpoint.  Raises NoContourError
    at the first step whose contour set is empty.
    """
    traj = np.asarray(traj, dtype=np.float64)
    if len(traj) != len(contours):
        raise ValueError("trajectory and contour list must share one length")
    out = np.empty_like(traj)
    for t, segs in enumerate(contours):
        if len(segs) == 0:
            raise NoContourError(f"no contour support at step {t + 1}")
        a = segs[:, 0, :]
        ab = segs[:, 1, :] - a
        denom = np.sum(ab * ab, axis=1)
        denom[denom == 0.0] = 1.0
        frac = np.clip(np.sum((traj[t] - a) * ab, axis=1) / denom, 0.0, 1.0)
        cand = a + frac[:, None] * ab
        d2 = np.sum((cand - traj[t]) ** 2, axis=1)
        out[t] = cand[np.argmin(d2)]
    return out


def fit_rigid(src: np.ndarray, dst: np.ndarray) -> RigidTransform:
    """Least-squares rigid motion taking src points onto dst points.

    Solves the 2-D Procrustes problem: rotation angle from the centered
    cross-covariance, translation aligning the centroids.  Raises
    DegenerateGeometryError when the points give the rotation no support
    (all src or all dst coincident).
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 2:
        raise ValueError("src and dst must both be (K, 2)")
    s_bar = src.mean(axis=0)
    d_bar = dst.mean(axis=0)
    sc = src - s_bar
    dc = dst - d_bar
    cos_sum = float(np.sum(sc[:, 0] * dc[:, 0] + sc[:, 1] * dc[:, 1]))
    sin_sum = float(np.sum(sc[:, 0] * dc[:, 1] - sc[:, 1] * dc[:, 0]))
    if cos_sum == 0.0 and sin_sum == 0.0:
        raise DegenerateGeometryError("rigid fit undetermined by these points")
    theta = float(np.arctan2(sin_sum, cos_sum))
    c, s = np.cos(theta), np.sin(theta)
    t_lon = d_bar[0] - (c * s_bar[0] - s * s_bar[1])
    t_lat = d_bar[1] - (s * s_bar[0] + c * s_bar[1])
    return RigidTransform(theta=theta, t_lon=float(t_lon), t_lat=float(t_lat))


def iccp_match(
    buffers: SegmentBuffers,
    grav_map: GravityMap,
    cfg: MatchConfig,
    max_iter: int = 50,
    tol_deg: float = 1e-6,
    history: list | None = None,
) -> PathEstimate:
    """Correct a buffered segment by iterating closest-point rigid fits.

    Contours come from windows of cfg.n cells around the raw INS positions
    and stay fixed while the trajectory moves; iteration stops when the
    largest per-point displacement of one update falls below tol_deg or
    after max_iter rounds.  If history is a list it receives the mean
    matched distance (degrees) at each iteration.  The returned states carry
    label 0 because corrected positions are not tied to the cell lattice.
    """
    s_ins = buffers.s_ins_array()
    zs = buffers.z_array()
    windows = [
        build_window(grav_map, lon, lat, cfg.n, time_index=t + 1)
        for t, (lon, lat) in enumerate(s_ins)
    ]
    contours = [extract_contour(w, z) for w, z in zip(windows, zs)]
    traj = s_ins.copy()
    for _ in range(max_iter):
        matched = closest_points(traj, contours)
        if history is not None:
            history.append(float(np.mean(np.hypot(*(matched - traj).T))))
        transform = fit_rigid(traj, matched)
        moved = transform.apply(traj)
        step = float(np.max(np.hypot(*(moved - traj).T)))
        traj = moved
        if step < tol_deg:
            break
    states = [
        CandidateState(
            t=t + 1,
            j=0,
            l=0,
            lon=float(lon),
            lat=float(lat),
            gravity=lookup(grav_map, lon, lat),
        )
        for t, (lon, lat) in enumerate(traj)
    ]
    vs = buffers.v_array()
    logp = float(meas_loglik(zs[0], states[0].gravity, cfg.sigma_z))
    for t in range(1, len(states)):
        logp += float(meas_loglik(zs[t], states[t].gravity, cfg.sigma_z))
        logp += float(
            trans_loglik(
                states[t].position,
                states[t - 1].position,
                vs[t - 1],
                cfg.dt_s,
                cfg.sigma_v,
            )
        )
    return PathEstimate(states=states, log_posterior=logp, work=0)
