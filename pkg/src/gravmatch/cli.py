"""Command-line interface.

Subcommands: synth-map writes a synthetic gravity map; run simulates one
mission and writes its per-step errors; mc runs a Monte Carlo batch and
writes a report; compare runs two configurations on shared seeds.  Scenario
settings come from an optional key=value config file plus flags of the same
names, flags winning.  --plot additionally renders a figure next to the
delimited output.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness, plots
from .mapgrid import save_map, synth_map
from .scenario import KNOWN_KEYS, ConfigError, read_config_file, scenario_from_mapping


def _add_scenario_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("scenario settings (override config file)")
    for key in sorted(KNOWN_KEYS):
        group.add_argument(f"--{key}", dest=key, metavar="VALUE")


def _build_scenario(args: argparse.Namespace):
    mapping: dict[str, str] = {}
    if args.config:
        mapping.update(read_config_file(args.config))
    for key in KNOWN_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            mapping[key] = value
    return scenario_from_mapping(mapping)


def _plot_path(out: str) -> str:
    return str(Path(out).with_suffix(".png"))


def _cmd_synth_map(args: argparse.Namespace) -> int:
    grav_map = synth_map(
        args.extent_deg,
        args.res_deg,
        roughness=args.roughness,
        seed=args.seed,
        origin_lon=args.origin_lon,
        origin_lat=args.origin_lat,
        n_bumps=args.bumps,
    )
    save_map(grav_map, args.out)
    print(f"wrote {grav_map.nrows}x{grav_map.ncols} map to {args.out}")
    if args.plot:
        plots.save_map_plot(grav_map, _plot_path(args.out))
        print(f"wrote {_plot_path(args.out)}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    scn = _build_scenario(args)
    result = harness.run_once(scn, scn.seed)
    lines = ["step,time_s,error_km,corrected"]
    for k, (err, corr) in enumerate(zip(result.errors_km, result.corrected), start=1):
        lines.append(f"{k},{k * scn.dt_s!r},{err:.6f},{int(corr)}")
    with open(args.out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    status = "ok" if result.success else f"divergent ({result.reason})"
    print(f"wrote {args.out}: {len(result.errors_km)} steps, {status}")
    if args.plot:
        plots.save_run_plot(result.errors_km, scn.dt_s, _plot_path(args.out))
        print(f"wrote {_plot_path(args.out)}")
    return 0


def _cmd_mc(args: argparse.Namespace) -> int:
    scn = _build_scenario(args)
    report = harness.monte_carlo(scn)
    harness.emit_report(report, args.out, fmt=args.format)
    mean = "n/a" if report.mean_km is None else f"{report.mean_km:.4f} km"
    print(
        f"wrote {args.out}: {len(report.runs)} runs, "
        f"success_rate={report.success_rate:.2f}, mean error {mean}"
    )
    if args.plot:
        plots.save_report_plot({scn.algorithm: report}, _plot_path(args.out))
        print(f"wrote {_plot_path(args.out)}")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    ref = scenario_from_mapping(read_config_file(args.config_a))
    cand = scenario_from_mapping(read_config_file(args.config_b))
    pair = harness.compare_runs(ref, cand)
    payload = {
        name: harness.report_to_dict(report) for name, report in pair.items()
    }
    with open(args.out, "w") as fh:
        fh.write(json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n")
    tcr = pair["candidate"].tcr
    print(f"wrote {args.out}: tcr={'n/a' if tcr is None else f'{tcr:.4f}'}")
    if args.plot:
        plots.save_report_plot(
            {
                pair["reference"].config["algorithm"] + " (ref)": pair["reference"],
                pair["candidate"].config["algorithm"]: pair["candidate"],
            },
            _plot_path(args.out),
        )
        print(f"wrote {_plot_path(args.out)}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="gravmatch",
        description="Gravity-map matching simulation and evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_map = sub.add_parser("synth-map", help="write a synthetic gravity map")
    p_map.add_argument("--out", required=True)
    p_map.add_argument("--extent-deg", type=float, required=True)
    p_map.add_argument("--res-deg", type=float, required=True)
    p_map.add_argument("--roughness", choices=["rough", "smooth"], default="rough")
    p_map.add_argument("--seed", type=int, default=0)
    p_map.add_argument("--origin-lon", type=float, default=110.0)
    p_map.add_argument("--origin-lat", type=float, default=-40.0)
    p_map.add_argument("--bumps", type=int, default=None)
    p_map.add_argument("--plot", action="store_true")
    p_map.set_defaults(func=_cmd_synth_map)

    p_run = sub.add_parser("run", help="simulate one mission, write per-step errors")
    p_run.add_argument("--config", default=None)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--plot", action="store_true")
    _add_scenario_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_mc = sub.add_parser("mc", help="Monte Carlo batch, write a report")
    p_mc.add_argument("--config", default=None)
    p_mc.add_argument("--out", required=True)
    p_mc.add_argument("--format", choices=["json", "csv"], default="json")
    p_mc.add_argument("--plot", action="store_true")
    _add_scenario_flags(p_mc)
    p_mc.set_defaults(func=_cmd_mc)

    p_cmp = sub.add_parser("compare", help="two configs on shared seeds")
    p_cmp.add_argument("--config-a", required=True, help="reference scenario file")
    p_cmp.add_argument("--config-b", required=True, help="candidate scenario file")
    p_cmp.add_argument("--out", required=True)
    p_cmp.add_argument("--plot", action="store_true")
    p_cmp.set_defaults(func=_cmd_compare)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
