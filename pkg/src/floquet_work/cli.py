"""Command-line front end.

Subcommands: spectrum, cgf, diagnose, entropy, workhist.  Each takes
`--config <path>` and `--out <dir>` and writes CSV/JSON artifacts into
the output directory.  Exit codes: 0 success, 2 configuration error,
3 numerical failure, 4 I/O failure; `diagnose` instead encodes the
identified singularity case in its exit status (10, 11, 12 for cases
a, b, c) so shell scripts can branch on it.

The parallel worker count is read from the FLOQUET_WORK_WORKERS
environment variable (default: the number of logical cores).
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from .asymptotics import diagnose as run_diagnosis
from .config import ConfigError, load_run_config
from .floquet import build_spectrum, worker_count
from .numerics import IntegrationError
from .serialize import (
    format_float,
    provenance_block,
    write_curve_csv,
    write_histogram_csv,
    write_json,
    write_spectrum_csv,
    write_spectrum_json,
)
from .workstats import (
    QuadratureDomainError,
    cgf_asymptotic,
    cgf_finite_n,
    entropy_sweep,
    work_histogram,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4
EXIT_CASE = {"a": 10, "b": 11, "c": 12}


def _want(cfg, kind):
    return cfg.output_format in (kind, "both")


def _build_table(cfg):
    return build_spectrum(cfg.protocol, n_k=cfg.n_k, config=cfg.integrator,
                          workers=worker_count())


def cmd_spectrum(cfg, out_dir):
    table = _build_table(cfg)
    if _want(cfg, "csv"):
        write_spectrum_csv(table, out_dir / "spectrum.csv")
    if _want(cfg, "json"):
        write_spectrum_json(table, out_dir / "spectrum.json", cfg.raw)
    return EXIT_OK


def cmd_cgf(cfg, out_dir):
    table = _build_table(cfg)
    task = cfg.task
    if task["s_scale"] == "log":
        s_grid = np.geomspace(task["s_min"], task["s_max"], task["s_count"])
    else:
        s_grid = np.linspace(task["s_min"], task["s_max"], task["s_count"])
    asymptotic = np.array([cgf_asymptotic(table, s) for s in s_grid])
    curves = {"asymptotic": asymptotic}
    for n in task["n_list"]:
        curves[f"n{n:05d}"] = np.array([cgf_finite_n(table, n, s) for s in s_grid])
    if _want(cfg, "csv"):
        write_curve_csv(out_dir / "cgf_asymptotic.csv",
                        ["s", "ln_g_over_l"], [s_grid, asymptotic])
        for n in task["n_list"]:
            write_curve_csv(out_dir / f"cgf_n{n:05d}.csv",
                            ["s", "ln_g_over_l"], [s_grid, curves[f"n{n:05d}"]])
    if _want(cfg, "json"):
        write_json(out_dir / "cgf.json", {
            "provenance": provenance_block(cfg.raw),
            "s": s_grid.tolist(),
            "curves": {name: vals.tolist() for name, vals in curves.items()},
        })
    return EXIT_OK


def cmd_diagnose(cfg, out_dir):
    table = _build_table(cfg)
    task = cfg.task
    report, small_fit, curves, diagnosis = run_diagnosis(
        table,
        l_max=task["l_max"],
        tol_res=task["tol_res"],
        tol_cdt=task["tol_cdt"],
        k_max=task["k_max"],
        s_grid=task["s_grid"],
    )
    prov = provenance_block(cfg.raw)
    if _want(cfg, "json"):
        write_json(out_dir / "resonance_report.json", {
            "provenance": prov,
            "h0": report.h0,
            "omega0": report.omega0,
            "h_initial": report.h_initial,
            "resonant": report.resonant,
            "l": report.l,
            "cdt": report.cdt,
            "h_critical_distance": report.h_critical_distance,
            "initial_gap": report.initial_gap,
            "tol_res": report.tol_res,
            "tol_cdt": report.tol_cdt,
        })
        if small_fit is not None:
            write_json(out_dir / "small_k_fit.json", {
                "provenance": prov,
                "regime": small_fit.regime,
                "coefficient": small_fit.coefficient,
                "window": list(small_fit.window),
                "residual_norm": small_fit.residual_norm,
                "n_points": small_fit.n_points,
            })
        write_json(out_dir / "singularity_diagnosis.json", {
            "provenance": prov,
            "case": diagnosis.case,
            "threshold": diagnosis.threshold,
            "strength": diagnosis.strength,
            "window": list(diagnosis.window),
            "residual_norm": diagnosis.residual_norm,
            "notes": diagnosis.notes,
        })
    if _want(cfg, "csv"):
        for name, curve in curves.items():
            write_curve_csv(out_dir / f"diagnostic_{name}.csv",
                            ["s", "value"], [curve.s, curve.values])
    return EXIT_CASE[diagnosis.case]


def cmd_entropy(cfg, out_dir):
    task = cfg.task
    curve = entropy_sweep(
        task["omega0_grid"],
        beta=task["beta"],
        length=task["length"],
        amplitude=task["amplitude"],
        n_k=cfg.n_k if cfg.n_k != 2000 else None,
        config=cfg.integrator,
        workers=worker_count(),
    )
    if _want(cfg, "csv"):
        write_curve_csv(out_dir / "entropy.csv",
                        ["omega0", "delta_s_irr"],
                        [curve.omega0, curve.delta_s_irr])
    if _want(cfg, "json"):
        write_json(out_dir / "entropy.json", {
            "provenance": provenance_block(cfg.raw),
            "beta": curve.beta,
            "length": curve.length,
            "amplitude": curve.amplitude,
            "omega0": curve.omega0.tolist(),
            "delta_s_irr": curve.delta_s_irr.tolist(),
        })
    return EXIT_OK


def cmd_workhist(cfg, out_dir):
    table = _build_table(cfg)
    task = cfg.task
    hist = work_histogram(table, task["n"], task["length"], task["bin_width"])
    if _want(cfg, "csv"):
        write_histogram_csv(hist, out_dir / "workhist.csv")
    if _want(cfg, "json"):
        write_json(out_dir / "workhist.json", {
            "provenance": provenance_block(cfg.raw),
            "length": hist.length,
            "n": "inf" if math.isinf(hist.n) else hist.n,
            "bin_width": hist.bin_width,
            "threshold": hist.threshold,
            "delta0_weight": hist.delta0_weight,
            "approximation": hist.approximation,
            "w_lo": hist.w_lo.tolist(),
            "w_hi": hist.w_hi.tolist(),
            "probability": hist.probability.tolist(),
            "total_probability": hist.total_probability,
        })
    return EXIT_OK


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "cgf": cmd_cgf,
    "diagnose": cmd_diagnose,
    "entropy": cmd_entropy,
    "workhist": cmd_workhist,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="floquet-work",
        description="Work statistics of the periodically driven Ising chain.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("spectrum", "solve the per-mode Floquet problem and write the table"),
        ("cgf", "cumulant generating function curves (finite n and stationary)"),
        ("diagnose", "classify and measure the small-work edge singularity"),
        ("entropy", "irreversible entropy over a drive-frequency sweep"),
        ("workhist", "exact finite-chain work histogram"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="run configuration file")
        cmd.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_run_config(args.config, args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, out_dir)
    except (IntegrationError, QuadratureDomainError, FloatingPointError,
            ValueError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
