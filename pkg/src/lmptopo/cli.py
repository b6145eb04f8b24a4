"""Command line entry point.

Subcommands mirror the pipeline stages: ``simulate`` a price stream,
``recover-batch`` a Laplacian from prices, ``sweep`` the kappa grid,
``track`` a reconfiguration event online, and ``eval`` a stored
estimate. Every run writes its artifacts (CSV/JSON plus figures) into a
fresh run directory together with a manifest JSON.

Exit codes: 0 success, 1 input/config error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import plots
from .batch import (DegenerateEstimateError, RecoveryError, RecoveryParams,
                    run_batch)
from .experiments import (ExperimentError, SwapEvent, evaluate,
                          run_batch_experiment, run_tracking_experiment)
from .grid import GridError, Line, ieee30, load_grid_file
from .market import (MarketError, read_price_matrix_csv,
                     write_price_matrix_csv)
from .online import OnlineParams
from .scenario import BadConfigError, ScenarioConfig, build_scenario, simulate
from .simplex import LpError

INPUT_ERROR = 1
NUMERICAL_ERROR = 2

INPUT_EXCEPTIONS = (BadConfigError, GridError, MarketError, ExperimentError,
                    OSError, KeyError, ValueError, json.JSONDecodeError)
NUMERICAL_EXCEPTIONS = (LpError, RecoveryError, DegenerateEstimateError,
                        np.linalg.LinAlgError)


def load_config(path) -> dict:
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise BadConfigError("config root must be a JSON object")
    return cfg


def scenario_config(cfg: dict, args) -> ScenarioConfig:
    section = dict(cfg.get("scenario", {}))
    if args.seed is not None:
        section["seed"] = args.seed
    if args.days is not None:
        section["days"] = args.days
    return ScenarioConfig(**section)


def recovery_params(cfg: dict, args) -> RecoveryParams:
    section = dict(cfg.get("recovery", {}))
    overrides = {"kappa1": args.kappa1, "kappa2": args.kappa2,
                 "rho": args.rho, "max_iters": args.max_iters,
                 "threshold_tau": args.tau}
    section.update({k: v for k, v in overrides.items() if v is not None})
    return RecoveryParams(**section)


def make_run_dir(args, command: str) -> Path:
    base = Path(args.out) if args.out else Path("runs")
    run_dir = base / f"{command}-{time.strftime('%Y%m%d-%H%M%S')}"
    suffix = 0
    while run_dir.exists():
        suffix += 1
        run_dir = base / f"{command}-{time.strftime('%Y%m%d-%H%M%S')}-{suffix}"
    run_dir.mkdir(parents=True)
    return run_dir


def write_manifest(run_dir: Path, command: str, cfg: dict,
                   artifacts: dict, extra: dict | None = None) -> None:
    manifest = {
        "command": command,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "config": cfg,
        "artifacts": artifacts,
    }
    if extra:
        manifest.update(extra)
    with open(run_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)


def write_matrix_csv(matrix: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in np.atleast_2d(matrix):
            w.writerow([repr(float(v)) for v in row])


def read_matrix_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        return np.array([[float(v) for v in row] for row in csv.reader(fh)])


def _topology(cfg: dict):
    grid_file = cfg.get("scenario", {}).get("grid_file")
    return load_grid_file(grid_file) if grid_file else ieee30()


def cmd_simulate(cfg: dict, args, run_dir: Path) -> int:
    config = scenario_config(cfg, args)
    pm, outcomes = simulate(config)
    write_price_matrix_csv(pm, run_dir / "prices.csv")
    summary = {
        "intervals": len(outcomes),
        "retained": len(pm.interval_ids),
        "infeasible": sum(1 for o in outcomes if o.status == "infeasible"),
        "uncongested": sum(1 for o in outcomes if o.status == "uncongested"),
        "degenerate": sum(1 for o in outcomes if o.degenerate),
        "congested_line_union": sorted(
            set().union(*(o.congested for o in outcomes))),
    }
    with open(run_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    plots.price_profile_plot(pm.values, pm.interval_ids,
                             run_dir / "prices.png")
    write_manifest(run_dir, "simulate", config.to_dict(),
                   {"prices": "prices.csv", "summary": "summary.json",
                    "figure": "prices.png"},
                   {"summary": summary})
    print(f"retained {summary['retained']} of {summary['intervals']} "
          f"intervals -> {run_dir}")
    return 0


def cmd_recover_batch(cfg: dict, args, run_dir: Path) -> int:
    params = recovery_params(cfg, args)
    prices_csv = cfg.get("prices_csv")
    if prices_csv:
        pm = read_price_matrix_csv(prices_csv)
    else:
        pm, _ = simulate(scenario_config(cfg, args))
    result = run_batch(pm.values, params)
    write_matrix_csv(result.B_hat, run_dir / "b_hat.csv")
    plots.laplacian_heatmap(result.B_hat, run_dir / "b_hat.png")
    plots.residual_history_plot(result.residual_history,
                                run_dir / "residuals.png")
    topology = _topology(cfg)
    report = evaluate(result.B_hat, topology, params.threshold_tau)
    info = {
        "converged": result.converged,
        "iterations": result.iterations,
        "wall_time": result.wall_time,
        "report": report.__dict__,
    }
    with open(run_dir / "report.json", "w") as fh:
        json.dump(info, fh, indent=2)
    write_manifest(run_dir, "recover-batch",
                   {"recovery": params.__dict__, "prices_csv": prices_csv},
                   {"b_hat": "b_hat.csv", "report": "report.json",
                    "figures": ["b_hat.png", "residuals.png"]})
    print(f"F1 {report.edge_f1:.3f}, avg degree {report.avg_degree:.2f} "
          f"after {result.iterations} iterations -> {run_dir}")
    return 0


def cmd_sweep(cfg: dict, args, run_dir: Path) -> int:
    config = scenario_config(cfg, args)
    base = recovery_params(cfg, args)
    grids = cfg.get("sweep", {})
    k1_grid = grids.get("kappa1_grid", [0.001, 0.1, 1.0])
    k2_grid = grids.get("kappa2_grid", [0.1, 1.0, 10.0])
    result = run_batch_experiment(config, k1_grid, k2_grid, base=base)
    write_matrix_csv(result.degree_table, run_dir / "degree_table.csv")
    write_matrix_csv(result.B_hat, run_dir / "b_hat.csv")
    plots.degree_table_heatmap(result.degree_table, k1_grid, k2_grid,
                               run_dir / "degree_table.png")
    plots.laplacian_heatmap(result.B_hat, run_dir / "b_hat.png")
    info = {"best_kappas": list(result.best_kappas),
            "kappa1_grid": k1_grid, "kappa2_grid": k2_grid,
            "report": result.report.__dict__}
    with open(run_dir / "report.json", "w") as fh:
        json.dump(info, fh, indent=2)
    write_manifest(run_dir, "sweep", config.to_dict(),
                   {"degree_table": "degree_table.csv", "b_hat": "b_hat.csv",
                    "report": "report.json",
                    "figures": ["degree_table.png", "b_hat.png"]},
                   {"best_kappas": list(result.best_kappas)})
    print(f"best kappas {result.best_kappas}, "
          f"F1 {result.report.edge_f1:.3f} -> {run_dir}")
    return 0


def cmd_track(cfg: dict, args, run_dir: Path) -> int:
    config = scenario_config(cfg, args)
    section = cfg.get("track", {})
    if "swap_interval" not in section:
        raise BadConfigError("track config requires swap_interval")
    swap = SwapEvent(
        interval=int(section["swap_interval"]),
        lines_out=[tuple(p) for p in section.get("lines_out", [])],
        lines_in=[Line(int(e["from"]), int(e["to"]), float(e["x"]),
                       float(e["fmax"])) for e in section.get("lines_in", [])])
    watch = [tuple(p) for p in section.get("watch", [])]
    if not watch:
        raise BadConfigError("track config requires a nonempty watch list")
    online = OnlineParams(**cfg.get("online", {}))
    result = run_tracking_experiment(
        config, swap, watch, online=online,
        threshold=float(section.get("threshold", 0.01)))

    labels = [f"{i}-{j}" for i, j in watch]
    with open(run_dir / "trace.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["interval", "congested"] + labels)
        for k, t in enumerate(result.trace_intervals):
            w.writerow([t, int(result.congested_flags[k])]
                       + [repr(float(v)) for v in result.trace[k]])
    with open(run_dir / "detection.json", "w") as fh:
        json.dump(result.detection, fh, indent=2)
    plots.tracking_trace_plot(result.trace, result.trace_intervals, labels,
                              run_dir / "trace.png",
                              swap_interval=swap.interval)
    write_matrix_csv(result.B_final, run_dir / "b_final.csv")
    write_manifest(run_dir, "track", config.to_dict(),
                   {"trace": "trace.csv", "detection": "detection.json",
                    "b_final": "b_final.csv", "figure": "trace.png"},
                   {"detection": result.detection})
    print(f"processed {len(result.trace_intervals)} intervals -> {run_dir}")
    return 0


def cmd_eval(cfg: dict, args, run_dir: Path) -> int:
    section = cfg.get("eval", {})
    if "b_hat_csv" not in section:
        raise BadConfigError("eval config requires b_hat_csv")
    B_hat = read_matrix_csv(section["b_hat_csv"])
    topology = _topology(cfg)
    tau = float(section.get("tau", args.tau if args.tau is not None else 0.01))
    report = evaluate(B_hat, topology, tau)
    with open(run_dir / "report.json", "w") as fh:
        json.dump(report.__dict__, fh, indent=2)
    plots.laplacian_heatmap(B_hat, run_dir / "b_hat.png")
    write_manifest(run_dir, "eval",
                   {"b_hat_csv": section["b_hat_csv"], "tau": tau},
                   {"report": "report.json", "figure": "b_hat.png"})
    print(f"precision {report.edge_precision:.3f} "
          f"recall {report.edge_recall:.3f} F1 {report.edge_f1:.3f}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "recover-batch": cmd_recover_batch,
    "sweep": cmd_sweep,
    "track": cmd_track,
    "eval": cmd_eval,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lmptopo",
        description="Electricity market simulation and grid topology recovery")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", help="base directory for run outputs")
        p.add_argument("--seed", type=int, help="override scenario seed")
        p.add_argument("--days", type=int, help="override simulated days")
        p.add_argument("--kappa1", type=float)
        p.add_argument("--kappa2", type=float)
        p.add_argument("--rho", type=float)
        p.add_argument("--max-iters", type=int, dest="max_iters")
        p.add_argument("--tau", type=float, help="support threshold")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        run_dir = make_run_dir(args, args.command)
        return COMMANDS[args.command](cfg, args, run_dir)
    except NUMERICAL_EXCEPTIONS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR
    except INPUT_EXCEPTIONS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
