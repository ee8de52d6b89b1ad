"""Truth trajectories, noisy sensor readings, and dead-reckoned navigation.

Positions are (lon, lat) in degrees and velocities in degrees/hour; gravity
readings are mGal.  Dead reckoning integrates measured velocity with the
step s_t = s_{t-1} + v_t * dt/3600, so a velocity sample covers the step that
ends at its own time index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LengthMismatchError
from .mapgrid import GravityMap, lookup


@dataclass(frozen=True)
class TruthState:
    """True position (degrees) and velocity (degrees/hour) at one time step."""

    lon: float
    lat: float
    vel_lon: float
    vel_lat: float

    @property
    def position(self) -> tuple[float, float]:
        return (self.lon, self.lat)

    @property
    def velocity(self) -> tuple[float, float]:
        return (self.vel_lon, self.vel_lat)


@dataclass(frozen=True)
class SensorConfig:
    """Velocity/gravimeter error model.

    bias is a constant velocity offset in degrees/hour per axis; sigma_v is
    white velocity noise in degrees/second (scaled to degrees/hour when
    applied); sigma_z is gravimeter noise in mGal; dt_s is the sampling
    period in seconds.
    """

    bias_lon: float = 0.0
    bias_lat: float = 0.0
    sigma_v: float = 0.0
    sigma_z: float = 0.0
    dt_s: float = 12.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.sigma_v < 0 or self.sigma_z < 0:
            raise ValueError("noise levels must be non-negative")
        if self.dt_s <= 0:
            raise ValueError("sampling period must be positive")


def simulate_truth(
    waypoints: list[tuple[float, float]], speed_deg_per_hr: float, dt_s: float
) -> list[TruthState]:
    """Constant-speed polyline traversal sampled every dt_s seconds.

    Returns states at arc lengths 0, d, 2d, ... with d = speed*dt/3600
    degrees, up to the last multiple that fits inside the route, so the final
    state lies within one step of the end waypoint.  Each state's velocity
    points along the leg being traversed over the following step; on a route
    of straight legs it changes direction only at waypoints.
    """
    if len(waypoints) < 2:
        raise ValueError("need at least two waypoints")
    if speed_deg_per_hr <= 0 or dt_s <= 0:
        raise ValueError("speed and dt must be positive")
    pts = np.asarray(waypoints, dtype=np.float64)
    seg = np.diff(pts, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    if np.any(seg_len == 0):
        raise ValueError("repeated consecutive waypoints")
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    step = speed_deg_per_hr * dt_s / 3600.0
    n_steps = int(np.floor(cum[-1] / step + 1e-12))
    states = []
    for k in range(n_steps + 1):
        s = k * step
        # Leg containing arc length s; at an exact joint take the outgoing leg.
        leg = min(int(np.searchsorted(cum, s, side="right")) - 1, len(seg) - 1)
        frac = (s - cum[leg]) / seg_len[leg]
        pos = pts[leg] + frac * seg[leg]
        direction = seg[leg] / seg_len[leg]
        vel = direction * speed_deg_per_hr
        states.append(TruthState(pos[0], pos[1], vel[0], vel[1]))
    return states


def measure_velocity(
    state: TruthState, cfg: SensorConfig, rng: np.random.Generator
) -> tuple[float, float]:
    """Velocity reading in degrees/hour: truth plus constant bias plus white noise."""
    sigma_hr = cfg.sigma_v * 3600.0
    noise = rng.normal(0.0, sigma_hr, size=2) if sigma_hr > 0 else np.zeros(2)
    return (
        state.vel_lon + cfg.bias_lon + noise[0],
        state.vel_lat + cfg.bias_lat + noise[1],
    )


def measure_gravity(
    grav_map: GravityMap,
    position: tuple[float, float],
    sigma_z: float,
    rng: np.random.Generator,
) -> float:
    """Gravimeter reading: map value at the true position plus white noise."""
    value = lookup(grav_map, position[0], position[1])
    if sigma_z > 0:
        value += rng.normal(0.0, sigma_z)
    return value


def dead_reckon(
    anchor: tuple[float, float],
    velocities: np.ndarray,
    dt_s: float,
) -> np.ndarray:
    """Integrate velocity samples from an anchor position.

    velocities is (K, 2) in degrees/hour; returns (K, 2) positions where
    row t is anchor + sum of the first t+1 velocity steps.
    """
    vels = np.asarray(velocities, dtype=np.float64)
    if vels.ndim != 2 or vels.shape[1] != 2:
        raise ValueError("velocities must be (K, 2)")
    return np.asarray(anchor, dtype=np.float64) + np.cumsum(
        vels * (dt_s / 3600.0), axis=0
    )


@dataclass
class SegmentBuffers:
    """Measurements accumulated since the last correction.

    z, v, and s_ins always share one length: gravity readings, velocity
    readings (degrees/hour), and dead-reckoned positions for the same steps.
    """

    z: list[float] = field(default_factory=list)
    v: list[tuple[float, float]] = field(default_factory=list)
    s_ins: list[tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        if not (len(self.z) == len(self.v) == len(self.s_ins)):
            raise LengthMismatchError("buffer lists must share one length")

    def __len__(self) -> int:
        return len(self.z)

    def push(
        self, z: float, v: tuple[float, float], s_ins: tuple[float, float]
    ) -> None:
        self.z.append(float(z))
        self.v.append((float(v[0]), float(v[1])))
        self.s_ins.append((float(s_ins[0]), float(s_ins[1])))

    def clear(self) -> None:
        self.z.clear()
        self.v.clear()
        self.s_ins.clear()

    def z_array(self) -> np.ndarray:
        return np.asarray(self.z, dtype=np.float64)

    def v_array(self) -> np.ndarray:
        return np.asarray(self.v, dtype=np.float64)

    def s_ins_array(self) -> np.ndarray:
        return np.asarray(self.s_ins, dtype=np.float64)


class NavLog:
    """Per-step record of a navigation run.

    Holds truth positions, the dead-reckoned/corrected position series, raw
    measurements, and which steps have been overwritten by a map-matching
    correction.  Step records start at the first step after the anchor.
    """

    def __init__(self, anchor: tuple[float, float], dt_s: float):
        self.anchor = (float(anchor[0]), float(anchor[1]))
        self.dt_s = float(dt_s)
        self.truth: list[tuple[float, float]] = []
        self.ins: list[tuple[float, float]] = []
        self.corrected: list[bool] = []
        self.z: list[float] = []
        self.v: list[tuple[float, float]] = []
        self._steps_since_correction = 0

    def __len__(self) -> int:
        return len(self.ins)

    @property
    def current(self) -> tuple[float, float]:
        """Position dead reckoning continues from."""
        return self.ins[-1] if self.ins else self.anchor

    def step(
        self,
        truth_position: tuple[float, float],
        v_meas: tuple[float, float],
        z_meas: float,
    ) -> tuple[float, float]:
        """Advance one dt with a measured velocity; returns the new INS position."""
        scale = self.dt_s / 3600.0
        prev = self.current
        pos = (prev[0] + v_meas[0] * scale, prev[1] + v_meas[1] * scale)
        self.truth.append((float(truth_position[0]), float(truth_position[1])))
        self.ins.append(pos)
        self.corrected.append(False)
        self.z.append(float(z_meas))
        self.v.append((float(v_meas[0]), float(v_meas[1])))
        self._steps_since_correction += 1
        return pos

    def ins_array(self) -> np.ndarray:
        return np.asarray(self.ins, dtype=np.float64)

    def truth_array(self) -> np.ndarray:
        return np.asarray(self.truth, dtype=np.float64)


def apply_correction(log: NavLog, segment_path) -> None:
    """Overwrite the most recent segment's INS positions with a matched path.

    segment_path is an (T, 2) position array or any object exposing
    .positions(); T must equal the number of steps recorded since the last
    correction (LengthMismatchError otherwise).  Subsequent dead reckoning
    continues from the final corrected position.
    """
    positions = (
        segment_path.positions()
        if hasattr(segment_path, "positions")
        else np.asarray(segment_path, dtype=np.float64)
    )
    if positions.ndim != 2 or positions.shape[1] != 2:
        raise ValueError("segment path must be (T, 2) positions")
    t_len = positions.shape[0]
    if t_len == 0 or t_len != log._steps_since_correction:
        raise LengthMismatchError(
            f"path covers {t_len} steps but {log._steps_since_correction} are pending"
        )
    for i, (lon, lat) in enumerate(positions, start=len(log.ins) - t_len):
        log.ins[i] = (float(lon), float(lat))
        log.corrected[i] = True
    log._steps_since_correction = 0
