"""Monte Carlo evaluation: runs, error metrics, divergence flags, reports.

A run simulates one mission: truth motion, noisy sensing, dead reckoning,
and a correction every T steps by the configured matcher.  Batches repeat
the run over consecutive seeds and reduce per-step great-circle errors to
the reported series and scalars.  Report files are byte-stable: repeated
emission of the same batch produces identical bytes, so wall-clock timing
never enters a report except as the explicitly requested time-cost ratio of
a comparison.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    LengthMismatchError,
    NoContourError,
    OutOfBoundsError,
    WindowClippedError,
)
from .iccp import iccp_match
from .insmodel import (
    NavLog,
    SegmentBuffers,
    apply_correction,
    measure_gravity,
    measure_velocity,
    simulate_truth,
)
from .mapgrid import GravityMap, build_window
from .matcher import PathEstimate, rvbmp, rvbmp2, vbmp, viterbi_exact
from .scenario import Scenario

EARTH_RADIUS_KM = 6371.0
KM_PER_DEG = float(np.pi) * EARTH_RADIUS_KM / 180.0


def haversine_km(a, b) -> np.ndarray | float:
    """Great-circle distance between (lon, lat) degree positions, in km."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    lon1, lat1 = np.radians(a[..., 0]), np.radians(a[..., 1])
    lon2, lat2 = np.radians(b[..., 0]), np.radians(b[..., 1])
    s_lat = np.sin((lat2 - lat1) / 2.0)
    s_lon = np.sin((lon2 - lon1) / 2.0)
    h = s_lat * s_lat + np.cos(lat1) * np.cos(lat2) * s_lon * s_lon
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(h))


@dataclass
class RunResult:
    """Outcome of one simulated mission."""

    seed: int
    errors_km: np.ndarray
    corrected: np.ndarray
    success: bool
    reason: str
    matcher_seconds: float


@dataclass(frozen=True)
class RunSummary:
    """Per-run payload carried inside a report for recomputation."""

    seed: int
    success: bool
    errors_km: tuple[float, ...]


@dataclass(frozen=True)
class RunReport:
    """Reduced batch statistics plus the per-run data they derive from.

    error_mean_km[k] averages step-k error over non-divergent runs (None when
    every run diverged); mean_km and std_km are the mean and sample standard
    deviation of that series over steps.  tcr is the matcher time-cost ratio
    against a named reference batch and is None for standalone batches.
    """

    config: dict[str, str]
    dt_s: float
    error_mean_km: tuple[float | None, ...]
    error_std_km: tuple[float | None, ...]
    mean_km: float | None
    std_km: float | None
    success_rate: float
    tcr: float | None
    runs: tuple[RunSummary, ...]


def default_divergence_threshold_km(scn: Scenario, grav_map: GravityMap) -> float:
    """Half the window span in km: (n/2) * max cell size * km-per-degree."""
    if scn.divergence_threshold_km is not None:
        return scn.divergence_threshold_km
    return (scn.n / 2.0) * max(grav_map.res_lon, grav_map.res_lat) * KM_PER_DEG


def divergence_check(result: RunResult, threshold_km: float) -> bool:
    """True when every corrected step's error stays strictly below threshold.

    An error exactly at the threshold counts as divergence.  Runs with no
    corrected steps pass vacuously.
    """
    errs = result.errors_km[result.corrected]
    return bool(np.all(errs < threshold_km)) if errs.size else True


_MATCHERS = {
    "vbmp": vbmp,
    "rvbmp": rvbmp,
    "rvbmp2": rvbmp2,
    "viterbi_exact": viterbi_exact,
}


def match_segment(
    grav_map: GravityMap, buffers: SegmentBuffers, scn: Scenario
) -> PathEstimate:
    """Run the configured corrector on one buffered segment."""
    cfg = scn.match_config()
    if scn.algorithm == "iccp":
        return iccp_match(
            buffers,
            grav_map,
            cfg,
            max_iter=scn.iccp_max_iter,
            tol_deg=scn.iccp_tol_deg,
        )
    windows = [
        build_window(grav_map, lon, lat, cfg.n, time_index=t + 1)
        for t, (lon, lat) in enumerate(buffers.s_ins)
    ]
    return _MATCHERS[scn.algorithm](windows, buffers, cfg)


def run_once(scn: Scenario, seed: int, grav_map: GravityMap | None = None) -> RunResult:
    """Simulate one mission end to end.

    Truth follows the waypoints; each step measures velocity and gravity,
    advances dead reckoning, and every T steps the matcher replaces the
    segment and re-anchors the INS at its corrected endpoint.  If a window
    clips the map edge or a contour level finds no support, matching stops
    for the rest of the run and the run is flagged divergent; dead reckoning
    still continues so the error series covers every step.  Matcher wall
    time covers matching only, never map generation or file I/O.
    """
    if grav_map is None:
        grav_map = scn.build_map()
    truth = simulate_truth(scn.waypoints, scn.speed_deg_per_hr, scn.dt_s)
    total = len(truth) - 1
    if total < 1:
        raise ValueError("route shorter than one step")
    sensor = scn.sensor_config()
    rng = np.random.default_rng(seed)
    log = NavLog(truth[0].position, scn.dt_s)
    buffers = SegmentBuffers()
    matcher_seconds = 0.0
    reason = ""
    for u in range(total):
        v_meas = measure_velocity(truth[u], sensor, rng)
        z_meas = measure_gravity(grav_map, truth[u + 1].position, sensor.sigma_z, rng)
        pos = log.step(truth[u + 1].position, v_meas, z_meas)
        buffers.push(z_meas, v_meas, pos)
        if len(buffers) == scn.T and scn.algorithm != "none" and not reason:
            start = time.perf_counter()
            try:
                path = match_segment(grav_map, buffers, scn)
                apply_correction(log, path)
            except (WindowClippedError, NoContourError, OutOfBoundsError) as exc:
                reason = type(exc).__name__
            finally:
                matcher_seconds += time.perf_counter() - start
            buffers.clear()
    errors = np.asarray(haversine_km(log.truth_array(), log.ins_array()))
    result = RunResult(
        seed=seed,
        errors_km=errors,
        corrected=np.asarray(log.corrected, dtype=bool),
        success=False,
        reason=reason,
        matcher_seconds=matcher_seconds,
    )
    threshold = default_divergence_threshold_km(scn, grav_map)
    if not reason:
        if divergence_check(result, threshold):
            result.success = True
        else:
            result.reason = "error_exceeded"
    return result


def run_batch(scn: Scenario, n_mc: int | None = None) -> list[RunResult]:
    """Independent runs at seeds seed, seed+1, ..., sharing one map."""
    count = scn.n_mc if n_mc is None else n_mc
    grav_map = scn.build_map()
    return [run_once(scn, scn.seed + i, grav_map) for i in range(count)]


def error_k(results: list[RunResult]) -> tuple[np.ndarray, np.ndarray]:
    """Per-step mean and sample std of error over non-divergent runs.

    Steps where no run (or only one, for the std) qualifies come back NaN.
    """
    if not results:
        raise ValueError("no runs to reduce")
    lengths = {len(r.errors_km) for r in results}
    if len(lengths) != 1:
        raise LengthMismatchError("runs have differing step counts")
    good_rows = [r.errors_km for r in results if r.success]
    if not good_rows:
        length = lengths.pop()
        return np.full(length, np.nan), np.full(length, np.nan)
    good = np.stack(good_rows)
    mean = good.mean(axis=0)
    std = (
        good.std(axis=0, ddof=1)
        if good.shape[0] > 1
        else np.full(good.shape[1], np.nan)
    )
    return mean, std


def _clean(values: np.ndarray) -> tuple[float | None, ...]:
    return tuple(None if not np.isfinite(v) else float(v) for v in values)


def summarize(
    scn: Scenario, results: list[RunResult], tcr: float | None = None
) -> RunReport:
    """Reduce a batch to a RunReport (statistics over non-divergent runs)."""
    mean_series, std_series = error_k(results)
    finite = mean_series[np.isfinite(mean_series)]
    if finite.size:
        mean_km = float(np.mean(finite))
        std_km = float(np.std(finite, ddof=1)) if finite.size > 1 else None
    else:
        mean_km, std_km = None, None
    return RunReport(
        config=scn.to_dict(),
        dt_s=scn.dt_s,
        error_mean_km=_clean(mean_series),
        error_std_km=_clean(std_series),
        mean_km=mean_km,
        std_km=std_km,
        success_rate=sum(r.success for r in results) / len(results),
        tcr=tcr,
        runs=tuple(
            RunSummary(
                seed=r.seed,
                success=r.success,
                errors_km=tuple(float(e) for e in r.errors_km),
            )
            for r in results
        ),
    )


def monte_carlo(scn: Scenario, n_mc: int | None = None) -> RunReport:
    """run_batch plus summarize; the standard batch entry point."""
    return summarize(scn, run_batch(scn, n_mc))


def batch_matcher_seconds(results: list[RunResult]) -> float:
    return float(sum(r.matcher_seconds for r in results))


def compare_runs(
    reference: Scenario, candidate: Scenario
) -> dict[str, RunReport]:
    """Run two configurations on shared seeds and relate their matcher cost.

    The candidate inherits the reference's seed and run count so both see
    identical noise streams; its tcr field holds candidate matcher seconds
    over reference matcher seconds.
    """
    candidate = replace(candidate, seed=reference.seed, n_mc=reference.n_mc)
    ref_results = run_batch(reference)
    cand_results = run_batch(candidate)
    ref_time = batch_matcher_seconds(ref_results)
    cand_time = batch_matcher_seconds(cand_results)
    tcr = cand_time / ref_time if ref_time > 0 else None
    return {
        "reference": summarize(reference, ref_results, tcr=1.0 if tcr else None),
        "candidate": summarize(candidate, cand_results, tcr=tcr),
    }


# ---------------------------------------------------------------------------
# Report files
# ---------------------------------------------------------------------------


def report_to_dict(report: RunReport) -> dict:
    return {
        "config": dict(sorted(report.config.items())),
        "dt_s": report.dt_s,
        "error_mean_km": list(report.error_mean_km),
        "error_std_km": list(report.error_std_km),
        "mean_km": report.mean_km,
        "std_km": report.std_km,
        "success_rate": report.success_rate,
        "tcr": report.tcr,
        "runs": [
            {"seed": r.seed, "success": r.success, "errors_km": list(r.errors_km)}
            for r in report.runs
        ],
    }


def report_from_dict(payload: dict) -> RunReport:
    return RunReport(
        config=dict(payload["config"]),
        dt_s=float(payload["dt_s"]),
        error_mean_km=tuple(payload["error_mean_km"]),
        error_std_km=tuple(payload["error_std_km"]),
        mean_km=payload["mean_km"],
        std_km=payload["std_km"],
        success_rate=float(payload["success_rate"]),
        tcr=payload["tcr"],
        runs=tuple(
            RunSummary(
                seed=int(r["seed"]),
                success=bool(r["success"]),
                errors_km=tuple(float(e) for e in r["errors_km"]),
            )
            for r in payload["runs"]
        ),
    )


def _csv_num(value: float | None) -> str:
    return "nan" if value is None else f"{value:.6f}"


def emit_report(report: RunReport, path: str, fmt: str = "json") -> None:
    """Write a report file; emission is deterministic byte for byte.

    JSON carries the whole report including per-run errors; CSV carries the
    per-step series with columns step, time_s, error_km_mean, error_km_std
    (time_s is simulated elapsed time).
    """
    if fmt == "json":
        text = json.dumps(
            report_to_dict(report), sort_keys=True, indent=2, allow_nan=False
        )
        with open(path, "w") as fh:
            fh.write(text + "\n")
    elif fmt == "csv":
        lines = ["step,time_s,error_km_mean,error_km_std"]
        for k, (mean, std) in enumerate(
            zip(report.error_mean_km, report.error_std_km), start=1
        ):
            lines.append(f"{k},{k * report.dt_s!r},{_csv_num(mean)},{_csv_num(std)}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def load_report(path: str) -> RunReport:
    """Read a JSON report back into an equal RunReport."""
    with open(path) as fh:
        return report_from_dict(json.load(fh))
