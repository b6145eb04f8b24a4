"""Benchmark experiments: batch kappa sweeps, online tracking, metrics.

Orchestrates the full protocol on a scenario: simulate prices, recover
the Laplacian over a kappa grid, score the estimate against the true
line set, and replay a reconfiguration event through the online tracker.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .batch import (RecoveryParams, average_degree, normalize_and_threshold,
                    run_batch, tune_kappas)
from .grid import GridTopology, Line, build_matrices, reduced_to_full_laplacian
from .online import OnlineParams, init_online, snapshot, step
from .scenario import Scenario, ScenarioConfig, build_scenario, clear_interval
from .market import assemble_price_matrix


class ExperimentError(Exception):
    pass


class DimensionMismatchError(ExperimentError):
    pass


@dataclass
class RecoveryReport:
    edge_precision: float
    edge_recall: float
    edge_f1: float
    avg_degree: float
    frobenius_error: float
    runtime: float = 0.0
    degeneracy_count: int = 0

    def __post_init__(self):
        for v in (self.edge_precision, self.edge_recall, self.edge_f1):
            if not 0.0 <= v <= 1.0 + 1e-12:
                raise ExperimentError(f"metric out of [0, 1]: {v}")


def true_support(topology: GridTopology) -> tuple[np.ndarray, np.ndarray]:
    """Normalized true reduced Laplacian and its off-diagonal support."""
    matrices = build_matrices(topology)
    B = matrices.reduced_laplacian
    adj = B != 0.0
    np.fill_diagonal(adj, False)
    return B / B.diagonal().max(), adj


def edges_from_estimate(B_hat: np.ndarray, topology: GridTopology,
                        tau: float) -> set[tuple[int, int]]:
    """Thresholded edge set of the full-Laplacian reconstruction.

    Reference-incident edges come from the zero-row-sum completion.
    """
    B_norm, _ = normalize_and_threshold(B_hat, tau)
    full = reduced_to_full_laplacian(B_norm, topology.reference_bus)
    # Re-threshold: row-sum completion can reintroduce tiny entries.
    full[np.abs(full) < tau] = 0.0
    adj = full != 0.0
    np.fill_diagonal(adj, False)
    return set(map(tuple, np.argwhere(np.triu(adj | adj.T, 1))))


def evaluate(B_hat: np.ndarray, topology: GridTopology,
             tau: float = 0.01) -> RecoveryReport:
    """Support metrics and normalized Frobenius error vs the true grid.

    The comparison is over the reduced matrix, so reference-incident
    lines (visible only through the zero-row-sum completion) do not
    enter the edge counts.
    """
    n = topology.bus_count - 1
    if B_hat.shape != (n, n):
        raise DimensionMismatchError(
            f"estimate is {B_hat.shape}, expected ({n}, {n})")
    B_true_norm, true_adj = true_support(topology)
    B_norm, adj = normalize_and_threshold(B_hat, tau)

    est_edges = set(zip(*np.where(np.triu(adj, 1))))
    true_edges = set(zip(*np.where(np.triu(true_adj, 1))))
    tp = len(est_edges & true_edges)
    precision = tp / len(est_edges) if est_edges else 0.0
    recall = tp / len(true_edges) if true_edges else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall > 0 else 0.0)

    frob = (np.linalg.norm(B_norm - B_true_norm)
            / max(np.linalg.norm(B_true_norm), 1e-12))
    return RecoveryReport(edge_precision=precision, edge_recall=recall,
                          edge_f1=f1, avg_degree=average_degree(adj),
                          frobenius_error=float(frob))


@dataclass
class BatchExperimentResult:
    report: RecoveryReport
    best_kappas: tuple[float, float]
    degree_table: np.ndarray
    kappa1_grid: list[float]
    kappa2_grid: list[float]
    B_hat: np.ndarray
    price_matrix: np.ndarray
    interval_ids: list[int]
    degeneracy_count: int


def run_batch_experiment(config: ScenarioConfig,
                         kappa1_grid, kappa2_grid,
                         base: RecoveryParams | None = None,
                         target_degree: float | None = None,
                         scenario: Scenario | None = None) -> BatchExperimentResult:
    """Simulate a horizon, sweep the kappa grid, score the tuned estimate."""
    if scenario is None:
        scenario = build_scenario(config)
    start = time.perf_counter()
    t_stop = config.days * config.intervals_per_day
    outcomes = [clear_interval(scenario, config, t) for t in range(t_stop)]
    pm = assemble_price_matrix(outcomes, drop_uncongested=config.drop_uncongested)
    degeneracy = sum(1 for o in outcomes if o.degenerate)

    if target_degree is None:
        target_degree = scenario.topology.average_degree()
    if base is None:
        base = RecoveryParams()
    best, table = tune_kappas(pm.values, kappa1_grid, kappa2_grid,
                              target_degree, base)
    params = RecoveryParams(kappa1=best[0], kappa2=best[1], rho=base.rho,
                            max_iters=base.max_iters, primal_tol=base.primal_tol,
                            threshold_tau=base.threshold_tau)
    result = run_batch(pm.values, params)
    report = evaluate(result.B_hat, scenario.topology, base.threshold_tau)
    report.runtime = time.perf_counter() - start
    report.degeneracy_count = degeneracy
    return BatchExperimentResult(
        report=report, best_kappas=best, degree_table=table,
        kappa1_grid=list(kappa1_grid), kappa2_grid=list(kappa2_grid),
        B_hat=result.B_hat, price_matrix=pm.values,
        interval_ids=pm.interval_ids, degeneracy_count=degeneracy)


@dataclass
class SwapEvent:
    """Topology reconfiguration applied at a global interval index."""

    interval: int
    lines_out: list[tuple[int, int]]       # bus pairs to remove
    lines_in: list[Line]                   # lines to add


@dataclass
class TrackingResult:
    trace: np.ndarray                      # intervals x watched entries
    trace_intervals: list[int]
    congested_flags: list[bool]
    watch_list: list[tuple[int, int]]      # bus pairs
    detection: dict
    B_final: np.ndarray
    params: OnlineParams


def _reduced_index(bus: int, reference: int) -> int:
    if bus == reference:
        raise ExperimentError("watched bus cannot be the reference bus")
    return bus - 1 if bus > reference else bus


def run_tracking_experiment(config: ScenarioConfig, swap: SwapEvent,
                            watch_list: list[tuple[int, int]],
                            online: OnlineParams | None = None,
                            warm_params: RecoveryParams | None = None,
                            scenario: Scenario | None = None,
                            threshold: float = 0.01,
                            skip_uncongested: bool = True) -> TrackingResult:
    """Replay a price stream with a mid-stream line swap through Alg-2-style
    tracking, warm-started from a batch solve on the pre-event prefix.
    """
    if scenario is None:
        scenario = build_scenario(config)
    t_total = config.days * config.intervals_per_day
    if not 0 < swap.interval < t_total:
        raise ExperimentError("swap interval outside the simulated horizon")

    post_topology = scenario.topology.replace_lines(swap.lines_out, swap.lines_in)
    post_scenario = scenario.with_topology(post_topology)

    # Warm start: batch solve on the pre-event day(s).
    warm_stop = min(swap.interval, config.intervals_per_day)
    warm_outcomes = [clear_interval(scenario, config, t) for t in range(warm_stop)]
    warm_pm = assemble_price_matrix(warm_outcomes, drop_uncongested=True)
    if warm_params is None:
        warm_params = RecoveryParams(kappa1=1.0, kappa2=1.0, rho=100.0,
                                     max_iters=20000, primal_tol=0.0)
    warm = run_batch(warm_pm.values, warm_params)

    n = scenario.topology.bus_count - 1
    ref = scenario.topology.reference_bus
    watch_idx = [(_reduced_index(i, ref), _reduced_index(j, ref))
                 for i, j in watch_list]
    if online is None:
        online = OnlineParams()
    state = init_online(n, online, warm_start=warm.B_hat)

    trace_rows, trace_ids, congested_flags = [], [], []
    for t in range(t_total):
        sc = scenario if t < swap.interval else post_scenario
        outcome = clear_interval(sc, config, t)
        if outcome.status == "infeasible":
            continue
        congested = outcome.status == "feasible"
        if skip_uncongested and not congested:
            continue
        state = step(state, outcome.mcc, online)
        trace_rows.append(snapshot(state, watch_idx))
        trace_ids.append(t)
        congested_flags.append(congested)

    trace = np.array(trace_rows)
    detection = _detection_report(trace, trace_ids, congested_flags,
                                  watch_list, swap, threshold)
    return TrackingResult(trace=trace, trace_intervals=trace_ids,
                          congested_flags=congested_flags,
                          watch_list=watch_list, detection=detection,
                          B_final=state.B1.copy(), params=online)


def _detection_report(trace, trace_ids, congested_flags, watch_list,
                      swap: SwapEvent, threshold: float) -> dict:
    """First post-event crossing of the support threshold per watched entry.

    Latency is counted in congested post-event intervals.
    """
    removed = {tuple(sorted(p)) for p in swap.lines_out}
    added = {tuple(sorted((ln.from_bus, ln.to_bus))) for ln in swap.lines_in}
    post = [k for k, t in enumerate(trace_ids) if t >= swap.interval]
    report = {}
    for col, pair in enumerate(watch_list):
        key = tuple(sorted(pair))
        kind = ("removed" if key in removed else
                "added" if key in added else "watch")
        entry = {"pair": pair, "kind": kind, "detected_at": None,
                 "latency_congested": None}
        if kind in ("removed", "added"):
            want_below = kind == "removed"
            seen_congested = 0
            for k in post:
                if congested_flags[k]:
                    seen_congested += 1
                value = trace[k, col]
                hit = value < threshold if want_below else value > threshold
                if hit:
                    entry["detected_at"] = trace_ids[k]
                    entry["latency_congested"] = seen_congested
                    break
        report[f"{pair[0]}-{pair[1]}"] = entry
    report["post_event_congested"] = sum(
        1 for k in post if congested_flags[k])
    return report
