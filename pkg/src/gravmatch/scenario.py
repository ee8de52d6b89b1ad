"""Experiment configuration: typed scenario plus the key=value file format.

A scenario names the map (a file or synthetic-field parameters), the route,
sensor errors, matcher settings, and Monte Carlo controls.  The same keys
work in config files and as CLI flags; flags override file values.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import GravmatchError
from .insmodel import SensorConfig
from .mapgrid import GravityMap, read_map, synth_map
from .matcher import MatchConfig

ALGORITHMS = ("none", "vbmp", "rvbmp", "rvbmp2", "viterbi_exact", "iccp")

# Model-noise floors applied when a scenario's sensor noise is zero, since
# the likelihoods are undefined at zero standard deviation.
MEAS_SIGMA_FLOOR_MGAL = 1e-3
VEL_SIGMA_FLOOR_DEG_PER_S = 1e-6


class ConfigError(GravmatchError):
    """A scenario file or override could not be parsed."""


@dataclass(frozen=True)
class Scenario:
    """Full description of one simulated mission and its evaluation."""

    waypoints: tuple[tuple[float, float], ...] = ()
    speed_deg_per_hr: float = 7.54
    dt_s: float = 12.0
    T: int = 6
    n: int = 13
    o: int = 5
    alpha: float = 0.1
    sigma_z_mgal: float = 1.0
    sigma_v_deg_per_s: float = 9e-6
    bias_deg_per_hr: tuple[float, float] = (1.0, 0.0)
    n_mc: int = 100
    seed: int = 0
    algorithm: str = "rvbmp2"
    map_path: str | None = None
    synth_extent_deg: float | None = None
    synth_res_deg: float | None = None
    synth_roughness: str = "rough"
    synth_seed: int = 0
    synth_origin_lon: float = 110.0
    synth_origin_lat: float = -40.0
    synth_bumps: int | None = None
    divergence_threshold_km: float | None = None
    iccp_max_iter: int = 50
    iccp_tol_deg: float = 1e-6

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.n_mc < 1:
            raise ConfigError("n_mc must be >= 1")

    def build_map(self) -> GravityMap:
        """Load the configured map file or synthesize the configured field."""
        if self.map_path is not None:
            return read_map(self.map_path)
        if self.synth_extent_deg is None or self.synth_res_deg is None:
            raise ConfigError("scenario needs either map or synth_extent_deg/synth_res_deg")
        return synth_map(
            self.synth_extent_deg,
            self.synth_res_deg,
            roughness=self.synth_roughness,
            seed=self.synth_seed,
            origin_lon=self.synth_origin_lon,
            origin_lat=self.synth_origin_lat,
            n_bumps=self.synth_bumps,
        )

    def sensor_config(self) -> SensorConfig:
        return SensorConfig(
            bias_lon=self.bias_deg_per_hr[0],
            bias_lat=self.bias_deg_per_hr[1],
            sigma_v=self.sigma_v_deg_per_s,
            sigma_z=self.sigma_z_mgal,
            dt_s=self.dt_s,
            rng_seed=self.seed,
        )

    def match_config(self) -> MatchConfig:
        return MatchConfig(
            T=self.T,
            n=self.n,
            o=self.o,
            alpha=self.alpha,
            sigma_z=max(self.sigma_z_mgal, MEAS_SIGMA_FLOOR_MGAL),
            sigma_v=max(self.sigma_v_deg_per_s, VEL_SIGMA_FLOOR_DEG_PER_S),
            dt_s=self.dt_s,
        )

    def to_dict(self) -> dict[str, str]:
        """Canonical string form of every setting, for config echo in reports."""
        out = {
            "waypoints": ";".join(f"{lon!r},{lat!r}" for lon, lat in self.waypoints),
            "speed_deg_per_hr": repr(self.speed_deg_per_hr),
            "dt_s": repr(self.dt_s),
            "T": str(self.T),
            "n": str(self.n),
            "o": str(self.o),
            "alpha": repr(self.alpha),
            "sigma_z_mgal": repr(self.sigma_z_mgal),
            "sigma_v_deg_per_s": repr(self.sigma_v_deg_per_s),
            "bias_deg_per_hr": f"{self.bias_deg_per_hr[0]!r},{self.bias_deg_per_hr[1]!r}",
            "n_mc": str(self.n_mc),
            "seed": str(self.seed),
            "algorithm": self.algorithm,
            "iccp_max_iter": str(self.iccp_max_iter),
            "iccp_tol_deg": repr(self.iccp_tol_deg),
        }
        if self.map_path is not None:
            out["map"] = self.map_path
        else:
            out["synth_extent_deg"] = repr(self.synth_extent_deg)
            out["synth_res_deg"] = repr(self.synth_res_deg)
            out["synth_roughness"] = self.synth_roughness
            out["synth_seed"] = str(self.synth_seed)
            out["synth_origin_lon"] = repr(self.synth_origin_lon)
            out["synth_origin_lat"] = repr(self.synth_origin_lat)
            if self.synth_bumps is not None:
                out["synth_bumps"] = str(self.synth_bumps)
        if self.divergence_threshold_km is not None:
            out["divergence_threshold_km"] = repr(self.divergence_threshold_km)
        return out


def _parse_waypoints(text: str, order: str) -> tuple[tuple[float, float], ...]:
    pts = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(",")
        if len(parts) != 2:
            raise ConfigError(f"waypoint {chunk!r} is not two comma-separated numbers")
        a, b = (float(parts[0]), float(parts[1]))
        pts.append((b, a) if order == "latlon" else (a, b))
    if len(pts) < 2:
        raise ConfigError("waypoints needs at least two points")
    return tuple(pts)


def _parse_bias(text: str) -> tuple[float, float]:
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) == 1:
        return (float(parts[0]), 0.0)
    if len(parts) == 2:
        return (float(parts[0]), float(parts[1]))
    raise ConfigError(f"bias {text!r} must be one or two numbers")


_FLOAT_KEYS = {
    "speed_deg_per_hr",
    "dt_s",
    "alpha",
    "sigma_z_mgal",
    "sigma_v_deg_per_s",
    "synth_extent_deg",
    "synth_res_deg",
    "synth_origin_lon",
    "synth_origin_lat",
    "divergence_threshold_km",
    "iccp_tol_deg",
}
_INT_KEYS = {"T", "n", "o", "n_mc", "seed", "synth_seed", "synth_bumps", "iccp_max_iter"}
_STR_KEYS = {"algorithm", "synth_roughness"}

KNOWN_KEYS = (
    {"map", "waypoints", "waypoints_order", "bias_deg_per_hr"}
    | _FLOAT_KEYS
    | _INT_KEYS
    | _STR_KEYS
)


def scenario_from_mapping(mapping: dict[str, str]) -> Scenario:
    """Build a Scenario from string key=value pairs; unknown keys are errors."""
    fields: dict = {}
    order = mapping.get("waypoints_order", "lonlat")
    if order not in ("lonlat", "latlon"):
        raise ConfigError("waypoints_order must be lonlat or latlon")
    for key, raw in mapping.items():
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown scenario key {key!r}")
        try:
            if key == "map":
                fields["map_path"] = raw
            elif key == "waypoints":
                fields["waypoints"] = _parse_waypoints(raw, order)
            elif key == "bias_deg_per_hr":
                fields["bias_deg_per_hr"] = _parse_bias(raw)
            elif key in _FLOAT_KEYS:
                fields[key] = float(raw)
            elif key in _INT_KEYS:
                fields[key] = int(raw)
            elif key in _STR_KEYS:
                fields[key] = raw.strip()
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return Scenario(**fields)


def read_config_file(path: str) -> dict[str, str]:
    """Parse a key=value scenario file; '#' starts a comment."""
    mapping: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, value = text.split("=", 1)
            mapping[key.strip()] = value.strip()
    return mapping


def scenario_from_file(path: str, overrides: dict[str, str] | None = None) -> Scenario:
    """Scenario from a config file with optional override pairs on top."""
    mapping = read_config_file(path)
    if overrides:
        mapping.update(overrides)
    return scenario_from_mapping(mapping)


def with_seed(scn: Scenario, seed: int) -> Scenario:
    return replace(scn, seed=seed)
