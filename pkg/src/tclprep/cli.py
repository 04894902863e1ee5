"""Command-line front end: ``tclprep run <config>``.

Each sweep point produces a trajectory CSV; a summary CSV collects the jolt
metrics and a TOML manifest echoes the effective configuration so that
``tclprep run <manifest>`` repeats the run exactly.
"""
from __future__ import annotations

import argparse
import logging
import math
import shutil
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np
import tomli_w

from . import __version__
from . import config as cfgmod
from .bath import NumericalError
from .evolve import (
    IntegrationError,
    gamma_series,
    integrate,
    jolt_metrics,
    write_table_csv,
    write_trajectory_csv,
)

log = logging.getLogger("tclprep")

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def bundled_config(name):
    """Path of a config shipped with the package (``fig1``, ``fig2``)."""
    stem = name[:-4] if name.endswith(".cfg") else name
    res = resources.files("tclprep") / "configs" / f"{stem}.cfg"
    return Path(str(res)) if res.is_file() else None


def resolve_config(arg):
    path = Path(arg)
    if path.is_file():
        return path
    bundled = bundled_config(arg)
    if bundled is None:
        raise cfgmod.ConfigError(f"config {arg!r} not found (bundled configs: fig1, fig2)")
    return bundled


class PointFailure(RuntimeError):
    pass


def run_point(index, assigned, point, dump_alpha=False, dump_coefficients=False):
    """Simulate one sweep point; returns plain data for the writer process."""
    try:
        return _run_point(index, assigned, point, dump_alpha, dump_coefficients)
    except (NumericalError, IntegrationError, ArithmeticError, ValueError) as exc:
        desc = ", ".join(f"{k}={v}" for k, v in assigned.items()) or point["scenario"]["kind"]
        raise PointFailure(f"sweep point {index} ({desc}): {exc}") from exc


def _run_point(index, assigned, point, dump_alpha, dump_coefficients):
    scenario = cfgmod.build_scenario(point)
    g = point["grid"]
    window = g["jolt_window_times_cutoff"] / scenario.cutoff
    traj = integrate(scenario, estimate_error=g["estimate_error"], decimate=g["decimate"],
                     jolt_window=window)
    gamma_inf = scenario.gamma_inf()
    metrics = None
    if scenario.dim == 2:
        comparison = None
        if g["cutoff_sensitivity"]:
            doubled = scenario.with_cutoff(2 * scenario.cutoff)
            n = int(math.ceil(scenario.t_max / doubled.dt - 1e-9))
            comparison = float(np.max(gamma_series(doubled, np.arange(n + 1) * doubled.dt)))
        metrics = jolt_metrics(traj.times, traj.observables["gamma"], gamma_inf, scenario.cutoff,
                               comparison_peak=comparison, window=window)
    extra = {}
    if dump_alpha:
        corr = scenario.correlation()
        w = np.linspace(-10, 10, 2001) * scenario.cutoff
        extra["alpha"] = (traj.times, corr(traj.times))
        extra["alpha_tilde"] = (w, corr.transform(w).astype(complex))
    if dump_coefficients:
        extra["coefficients"] = (traj.times, scenario.coefficient()(traj.times))
    return {
        "index": index,
        "assigned": assigned,
        "kind": scenario.kind,
        "recipe": scenario.recipe,
        "trajectory": traj,
        "gamma_inf": gamma_inf,
        "metrics": metrics,
        "grid": {"dt": scenario.dt, "t_max": scenario.t_max, "steps": int(round(scenario.t_max / scenario.dt)),
                 "error_estimate": traj.error_estimate},
        "extra": extra,
    }


def _apply_cli_overrides(cfg, args):
    for item in args.override or []:
        key, value = cfgmod.parse_override(item)
        cfgmod.set_path(cfg, key, value)
    if args.dt is not None:
        cfgmod.set_path(cfg, "grid.dt_times_omega", args.dt)
    if args.t_max is not None:
        cfgmod.set_path(cfg, "grid.t_max_times_omega", args.t_max)
    if args.output is not None:
        cfg["output"]["directory"] = args.output
    cfgmod._check_values(cfg)
    return cfg


def _summary_rows(results, sweep_paths):
    header = ["point", *sweep_paths, "kind", "recipe", "peak", "peak_time", "settle_time",
              "gamma_inf", "cutoff_sensitivity", "error_estimate", "trajectory"]
    rows = []
    for r in results:
        m = r["metrics"]
        vals = [m.peak_value, m.peak_time, m.settle_time, r["gamma_inf"], m.cutoff_sensitivity] \
            if m else [math.nan] * 5
        rows.append([str(r["index"]), *(str(r["assigned"][p]) for p in sweep_paths), r["kind"],
                     r["recipe"], *vals, r["grid"]["error_estimate"], r["file"]])
    return header, rows


def _manifest(cfg, results):
    echo = {k: v for k, v in cfg.items() if k != "sweep"}
    if cfg["sweep"]:
        echo["sweep"] = cfg["sweep"]
    return {
        "run": {
            "tool": "tclprep",
            "version": __version__,
            "points": [{"index": r["index"], "file": r["file"], **r["grid"]} for r in results],
        },
        "config": echo,
    }


def _write_outputs(results, cfg, out_dir, stem):
    """Write everything into a staging directory, then move it into place."""
    out_dir.mkdir(parents=True, exist_ok=True)
    sweep_paths = [e["path"] for e in cfg["sweep"]]
    with tempfile.TemporaryDirectory(dir=out_dir) as tmp:
        tmp = Path(tmp)
        for r in results:
            r["file"] = f"{stem}_{r['index']:03d}.csv"
            write_trajectory_csv(tmp / r["file"], r["trajectory"])
            ex = r["extra"]
            if "alpha" in ex:
                t, a = ex["alpha"]
                write_table_csv(tmp / f"{stem}_{r['index']:03d}_alpha.csv", ["t", "re", "im"],
                                zip(t, a.real, a.imag))
                w, at = ex["alpha_tilde"]
                write_table_csv(tmp / f"{stem}_{r['index']:03d}_alpha_tilde.csv",
                                ["omega", "re", "im"], zip(w, at.real, at.imag))
            if "coefficients" in ex:
                t, A = ex["coefficients"]
                d = A.shape[-1]
                header = ["t"] + [f"{part}_A{i}{j}" for i in range(d) for j in range(d)
                                  for part in ("re", "im")]
                flat = A.reshape(len(t), -1)
                rows = ([ti, *np.column_stack([f.real, f.imag]).ravel()] for ti, f in zip(t, flat))
                write_table_csv(tmp / f"{stem}_{r['index']:03d}_coefficients.csv", header, rows)
        header, rows = _summary_rows(results, sweep_paths)
        write_table_csv(tmp / f"{stem}_summary.csv", header, rows)
        (tmp / f"{stem}_manifest.toml").write_text(tomli_w.dumps(_manifest(cfg, results)))
        for f in sorted(tmp.iterdir()):
            shutil.move(str(f), out_dir / f.name)


def cmd_run(args):
    path = resolve_config(args.config)
    cfg, _ = cfgmod.load(path)
    cfg = _apply_cli_overrides(cfg, args)
    points = cfgmod.sweep_points(cfg)
    for _, p in points:  # surface config problems before any simulation
        cfgmod.build_scenario(p)
    jobs = [(i, a, p, args.dump_alpha, args.dump_coefficients) for i, (a, p) in enumerate(points)]
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(run_point, *zip(*jobs)))
    else:
        results = [run_point(*j) for j in jobs]
    out_dir = Path(cfg["output"]["directory"])
    _write_outputs(results, cfg, out_dir, cfg["output"]["stem"])
    for r in results:
        m = r["metrics"]
        desc = ", ".join(f"{k}={v}" for k, v in r["assigned"].items()) or r["recipe"]
        if m:
            log.info("point %d (%s): peak %.6g at t=%.4g, gamma_inf %.6g", r["index"], desc,
                     m.peak_value, m.peak_time, r["gamma_inf"])
        else:
            log.info("point %d (%s): done", r["index"], desc)
    log.info("wrote %d trajectories to %s", len(results), out_dir)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="tclprep",
                                     description="Second-order time-local master equation runs")
    parser.add_argument("--version", action="version", version=f"tclprep {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a config (path or bundled name) or a manifest")
    run.add_argument("config")
    run.add_argument("--output", help="output directory (overrides output.directory)")
    run.add_argument("--override", action="append", metavar="KEY=VALUE",
                     help="set a config parameter, e.g. scenario.cutoff_over_omega=50")
    run.add_argument("--dt", type=float, help="time step in units of 1/omega")
    run.add_argument("--t-max", type=float, dest="t_max", help="final time in units of 1/omega")
    run.add_argument("--dump-alpha", action="store_true", help="write alpha(t) and alpha_tilde tables")
    run.add_argument("--dump-coefficients", action="store_true",
                     help="write coefficient trajectories")
    run.add_argument("--seed", type=int, default=None, help="reserved; runs are deterministic")
    run.add_argument("--workers", type=int, default=1, help="parallel sweep workers")
    run.set_defaults(func=cmd_run)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except cfgmod.ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except PointFailure as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
