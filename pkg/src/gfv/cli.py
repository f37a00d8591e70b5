"""Command-line front end.

    gfv validate  --config run.json
    gfv simulate  --config run.json [--out DIR]
    gfv eigen     --config run.json [--out DIR]
    gfv sweep     --config run.json --param p --values 0.2,0.5,0.8 [--out DIR]
    gfv reproduce table1|figure2|figure4|figure5 [--out DIR]

Exit codes: 0 ok, 2 configuration error, 3 numerical failure.  The
environment variable GFV_THREADS caps sweep parallelism.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, analytics, entropy, spectral
from .config import RunConfig, config_from_dict, parse_config
from .dynamics import Schedule, initial_profile, simulate
from .errors import ConfigError, GfvError, NumericsError
from .model import validate_kernel
from .operator import assemble
from .runio import write_csv, write_diagnostics, write_eigenpair, write_json, write_snapshot


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gfv",
        description="Growth-fragmentation solver with variability in growth rate",
    )
    parser.add_argument("--version", action="version", version=f"gfv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="JSON run file")
        p.add_argument("--out", default=None, help="output directory override")

    add_common(sub.add_parser("validate", help="check a configuration, report kernel structure"))
    add_common(sub.add_parser("simulate", help="time-step the model, write diagnostics"))
    add_common(sub.add_parser("eigen", help="compute the dominant eigenpair"))

    sweep = sub.add_parser("sweep", help="repeat a run over parameter values")
    add_common(sweep)
    sweep.add_argument("--param", required=True, choices=("p", "death_factor"))
    sweep.add_argument("--values", required=True,
                       help="comma-separated parameter values")

    rep = sub.add_parser("reproduce", help="canned desk-scale experiments")
    rep.add_argument("target", choices=("table1", "figure2", "figure4", "figure5"))
    rep.add_argument("--out", default=None)
    return parser


def _out_dir(config: RunConfig | None, args) -> Path:
    if args.out is not None:
        path = Path(args.out)
    elif config is not None:
        path = Path(config.output.directory)
    else:
        path = Path("out")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _solve_pair(config: RunConfig, op):
    """Eigen solve for diagnostics; oscillating tail-averaged pairs are kept."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            pair = spectral.solve_eigenproblem(
                op, tol=config.eigen.tol, max_iter=config.eigen.max_iter
            )
        except NumericsError:
            return None
    if pair.converged or pair.oscillating:
        return pair
    return None


def _run_case(config: RunConfig, out_dir: Path, label: str = "",
              with_eigen: bool = True) -> dict:
    """Simulate one configuration, write its files, return summary values."""
    prefix = f"{label}_" if label else ""
    op = assemble(config.grid, config.model, validate=False)
    pair = _solve_pair(config, op) if with_eigen else None
    init = initial_profile(config.grid, config.model.features.count,
                           config.initial.a, config.initial.b_exp)
    started = time.perf_counter()
    traj = simulate(config.model, config.grid, config.schedule, init,
                    eigenpair=pair, op=op)
    elapsed = time.perf_counter() - started
    write_diagnostics(out_dir / f"{prefix}diagnostics.csv", traj, config.to_json())
    if config.output.emit_snapshots:
        for t_snap, values, log_scale in traj.snapshots:
            write_snapshot(out_dir / f"{prefix}snapshot_t{t_snap:.6g}.csv",
                           config.grid, values, log_scale, config.to_json())
    summary = {
        "label": label or "run",
        "t_end": float(traj.times[-1]),
        "wall_seconds": elapsed,
        "lambda_n": spectral.estimate_lambda_n(traj),
        "lambda_tau": spectral.averaged_estimate(traj, "lambda_tau"),
        "lambda_gamma": spectral.averaged_estimate(traj, "lambda_gamma"),
    }
    if pair is not None:
        summary["eigen_rate"] = pair.growth_rate
        summary["eigen_converged"] = pair.converged
        summary["eigen_oscillating"] = pair.oscillating
    return summary


def cmd_validate(args) -> int:
    config = parse_config(args.config)
    report = validate_kernel(config.model.kernel, config.model, config.grid)
    op = assemble(config.grid, config.model, validate=False)
    payload = {
        "grid": {
            "N": config.grid.half_count,
            "k": config.grid.resolution,
            "nodes": config.grid.size,
            "span": [float(config.grid.nodes[0]), float(config.grid.nodes[-1])],
        },
        "kernel": report.as_dict(),
        "dt_max": op.dt_max(),
        "stiffness_at_dt_max": op.stiffness(op.dt_max()),
        "warnings": [] if report.irreducible else
            ["kernel is reducible: eigenpair may be degenerate, dynamics may oscillate"],
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_simulate(args) -> int:
    config = parse_config(args.config)
    out = _out_dir(config, args)
    summary = _run_case(config, out)
    write_json(out / "summary.json", summary)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_eigen(args) -> int:
    config = parse_config(args.config)
    out = _out_dir(config, args)
    op = assemble(config.grid, config.model, validate=False)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pair = spectral.solve_eigenproblem(
            op, tol=config.eigen.tol, max_iter=config.eigen.max_iter
        )
    write_eigenpair(out / "eigenpair.csv", config.grid, pair, config.to_json())
    report = {
        "growth_rate": pair.growth_rate,
        "converged": pair.converged,
        "oscillating": pair.oscillating,
        "oscillation_amplitude": pair.oscillation_amplitude,
        "residual_direct": pair.residual_direct,
        "residual_adjoint": pair.residual_adjoint,
        "iterations": pair.iterations,
        "duality_residual": analytics.duality_residual(op, pair),
        "partial": not pair.converged,
    }
    write_json(out / "eigen_report.json", report)
    print(json.dumps(report, indent=2, sort_keys=True))
    if not pair.converged:
        print("eigen solve did not converge (outputs flagged partial)", file=sys.stderr)
        return 3
    return 0


def cmd_sweep(args) -> int:
    config = parse_config(args.config)
    out = _out_dir(config, args)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --values list: {exc}") from exc
    if not values:
        raise ConfigError("--values is empty")

    def build_cell(value: float) -> RunConfig:
        raw = copy.deepcopy(config.raw)
        if args.param == "p":
            kernel = raw.get("model", {}).get("kernel", {})
            if "name" not in kernel:
                raise ConfigError("sweep over p needs a named kernel family")
            kernel["p"] = value
        else:
            raw["model"]["death_factor"] = value
        return config_from_dict(raw)

    cells = [(value, build_cell(value)) for value in values]

    def run_cell(item):
        value, cell_config = item
        cell_dir = out / f"{args.param}_{value:g}"
        cell_dir.mkdir(parents=True, exist_ok=True)
        return _run_case(cell_config, cell_dir, with_eigen=False) | {"value": value}

    threads = max(1, int(os.environ.get("GFV_THREADS", "1")))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            summaries = list(pool.map(run_cell, cells))
    else:
        summaries = [run_cell(item) for item in cells]

    table = {
        args.param: [s["value"] for s in summaries],
        "lambda_n": [s["lambda_n"] for s in summaries],
        "lambda_tau": [s["lambda_tau"] for s in summaries],
        "lambda_gamma": [s["lambda_gamma"] for s in summaries],
    }
    write_csv(out / "sweep.csv", table, config.to_json())
    print(json.dumps(summaries, indent=2, sort_keys=True))
    return 0


# -- canned desk-scale experiments -----------------------------------------


TABLE1_REFERENCE = {
    "non_mixing": {"lambda_n": 3.005, "lambda_tau": 3.000, "lambda_gamma": 3.007},
    "mixing": {"lambda_n": 1.469, "lambda_tau": 1.465, "lambda_gamma": 1.470},
}


def _experiment_config(kernel: dict, features, t_end: float, record_dt: float,
                       snapshot_times=(), emit_snapshots=False,
                       max_iter: int = 60_000, out_dir: str = "out",
                       preset: str = "desk") -> RunConfig:
    return config_from_dict({
        "grid": {"preset": preset},
        "model": {
            "features": list(features),
            "growth": {"kind": "linear"},
            "division": {"kind": "power", "coeff": 1.0, "exponent": 2.0},
            "kernel": kernel,
        },
        "schedule": {
            "t_end": t_end,
            "record_dt": record_dt,
            "snapshot_times": list(snapshot_times),
        },
        "eigen": {"tol": 1e-10, "max_iter": max_iter},
        "output": {"directory": out_dir, "emit_snapshots": emit_snapshots},
    })


def reproduce_table1(out: Path) -> dict:
    cases = {
        "non_mixing": {"name": "reducible"},
        "mixing": {"name": "irreducible"},
    }
    rows = {"case": [], "lambda_n": [], "lambda_n_ref": [], "lambda_tau": [],
            "lambda_tau_ref": [], "lambda_gamma": [], "lambda_gamma_ref": [],
            "wall_seconds": []}
    summaries = {}
    for label, kernel in cases.items():
        config = _experiment_config(kernel, (1.0, 2.0, 3.0), t_end=40.0,
                                    record_dt=0.02, out_dir=str(out))
        summary = _run_case(config, out, label=label, with_eigen=False)
        summaries[label] = summary
        refs = TABLE1_REFERENCE[label]
        rows["case"].append(label)
        rows["wall_seconds"].append(summary["wall_seconds"])
        for est in ("lambda_n", "lambda_tau", "lambda_gamma"):
            rows[est].append(summary[est])
            rows[f"{est}_ref"].append(refs[est])
    write_csv(out / "table1.csv", rows, json.dumps({"reproduce": "table1"}))
    return summaries


def reproduce_figure2(out: Path) -> dict:
    summaries = {}
    for label, kernel in (("non_mixing", {"name": "reducible"}),
                          ("mixing", {"name": "irreducible"})):
        config = _experiment_config(
            kernel, (1.0, 2.0, 3.0), t_end=40.0, record_dt=0.005,
            snapshot_times=(2.0, 5.0, 10.0, 20.0, 40.0), emit_snapshots=True,
            max_iter=40_000, out_dir=str(out),
        )
        summaries[label] = _run_case(config, out, label=label)
    write_json(out / "figure2_summary.json", summaries)
    return summaries


def reproduce_figure4(out: Path) -> dict:
    v1, v2 = 1.0, 2.0
    p0 = analytics.critical_p0(v1, v2)
    summaries = {"p0": p0}
    rows = {"p": [], "side": [], "lambda_n": [], "lambda_predicted": []}
    for side, p in (("below", p0 - 0.05), ("above", p0 + 0.05)):
        config = _experiment_config({"name": "fast_to_slow", "p": p}, (v1, v2),
                                    t_end=60.0, record_dt=0.005, out_dir=str(out),
                                    preset="refined")
        summary = _run_case(config, out, label=f"fts_{side}", with_eigen=False)
        summaries[side] = summary
        rows["p"].append(p)
        rows["side"].append(side)
        rows["lambda_n"].append(summary["lambda_n"])
        rows["lambda_predicted"].append(analytics.predicted_rate("fast_to_slow", p, v1, v2))
    write_csv(out / "figure4.csv", rows, json.dumps({"reproduce": "figure4"}))
    return summaries


def reproduce_figure5(out: Path) -> dict:
    v1, v2 = 1.0, 2.0
    runs = (
        ("stf_p0.5", "slow_to_fast", 0.5, 40.0),
        ("fts_p0.2", "fast_to_slow", 0.2, 40.0),
        ("fts_p0.8", "fast_to_slow", 0.8, 60.0),
    )
    rows = {"case": [], "p": [], "lambda_n": [], "lambda_predicted": [],
            "slow_share": [], "fast_share": [], "slow_verdict": [],
            "fast_verdict": [], "agrees": []}
    summaries = {}
    for label, family, p, t_end in runs:
        config = _experiment_config(
            {"name": family, "p": p}, (v1, v2), t_end=t_end, record_dt=0.005,
            snapshot_times=(t_end,), emit_snapshots=True, out_dir=str(out),
            preset="refined",
        )
        op = assemble(config.grid, config.model, validate=False)
        init = initial_profile(config.grid, 2, config.initial.a, config.initial.b_exp)
        traj = simulate(config.model, config.grid, config.schedule, init, op=op)
        write_diagnostics(out / f"{label}_diagnostics.csv", traj, config.to_json())
        measured = spectral.estimate_lambda_n(traj)
        final_values, log_scale = traj.snapshots[-1][1], traj.snapshots[-1][2]
        shares = (config.grid.weights[None, :] * final_values).sum(axis=1)
        shares /= shares.sum()
        verdicts = [
            entropy.detect_oscillation(traj.times,
                                       traj.columns[f"slice_f{i + 1}_x1"],
                                       window=t_end / 3.0)
            for i in range(2)
        ]
        comparison = analytics.evaluate_conjecture(
            family, p, v1, v2, measured, shares, verdicts
        )
        summaries[label] = {
            "lambda_n": measured,
            "predicted": comparison.predicted,
            "agrees": comparison.agrees,
        }
        rows["case"].append(label)
        rows["p"].append(p)
        rows["lambda_n"].append(measured)
        rows["lambda_predicted"].append(comparison.predicted)
        rows["slow_share"].append(float(shares[0]))
        rows["fast_share"].append(float(shares[1]))
        rows["slow_verdict"].append(verdicts[0].kind)
        rows["fast_verdict"].append(verdicts[1].kind)
        rows["agrees"].append(str(comparison.agrees))
    write_csv(out / "figure5.csv", rows, json.dumps({"reproduce": "figure5"}))
    return summaries


def cmd_reproduce(args) -> int:
    out = _out_dir(None, args)
    targets = {
        "table1": reproduce_table1,
        "figure2": reproduce_figure2,
        "figure4": reproduce_figure4,
        "figure5": reproduce_figure5,
    }
    summary = targets[args.target](out)
    print(json.dumps(summary, indent=2, sort_keys=True, default=str))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "validate": cmd_validate,
        "simulate": cmd_simulate,
        "eigen": cmd_eigen,
        "sweep": cmd_sweep,
        "reproduce": cmd_reproduce,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except GfvError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
