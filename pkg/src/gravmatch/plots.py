"""Figure rendering for reports and maps (written to files, never shown)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import RunReport
from .mapgrid import GravityMap


def _series(report: RunReport) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    times = np.arange(1, len(report.error_mean_km) + 1) * report.dt_s
    mean = np.array(
        [np.nan if v is None else v for v in report.error_mean_km], dtype=np.float64
    )
    std = np.array(
        [np.nan if v is None else v for v in report.error_std_km], dtype=np.float64
    )
    return times, mean, std


def save_report_plot(reports: dict[str, RunReport], path: str) -> None:
    """Mean position error against mission time, one curve per labeled report."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for label, report in reports.items():
        times, mean, std = _series(report)
        (line,) = ax.plot(times, mean, label=label)
        if len(reports) == 1 and np.any(np.isfinite(std)):
            ax.fill_between(
                times, mean - std, mean + std, alpha=0.2, color=line.get_color()
            )
    ax.set_xlabel("mission time [s]")
    ax.set_ylabel("mean position error [km]")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_run_plot(errors_km: np.ndarray, dt_s: float, path: str) -> None:
    """Single-run position error against mission time."""
    times = np.arange(1, len(errors_km) + 1) * dt_s
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.plot(times, errors_km)
    ax.set_xlabel("mission time [s]")
    ax.set_ylabel("position error [km]")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_map_plot(
    grav_map: GravityMap, path: str, tracks: dict[str, np.ndarray] | None = None
) -> None:
    """Gravity field as an image with optional (lon, lat) tracks drawn on top."""
    extent = [
        grav_map.origin_lon - grav_map.res_lon / 2.0,
        grav_map.origin_lon + (grav_map.ncols - 0.5) * grav_map.res_lon,
        grav_map.origin_lat - grav_map.res_lat / 2.0,
        grav_map.origin_lat + (grav_map.nrows - 0.5) * grav_map.res_lat,
    ]
    fig, ax = plt.subplots(figsize=(7, 6))
    img = ax.imshow(
        grav_map.values, origin="lower", extent=extent, aspect="auto", cmap="viridis"
    )
    fig.colorbar(img, ax=ax, label="gravity [mGal]")
    if tracks:
        for label, pts in tracks.items():
            pts = np.asarray(pts)
            ax.plot(pts[:, 0], pts[:, 1], label=label, linewidth=1.2)
        ax.legend()
    ax.set_xlabel("longitude [deg]")
    ax.set_ylabel("latitude [deg]")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
