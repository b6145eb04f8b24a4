"""End-to-end acceptance checks with pinned tolerances.

One test per criterion. Each test prints a single ``criterion N: PASS/FAIL``
line with its measured margins before asserting, so the verdicts survive in
the captured output either way. The recovery criteria share their solver
instances: criterion 5 audits feasibility on every run produced by
criteria 3 and 4.
"""

import copy
import time
from types import SimpleNamespace

import numpy as np
import pytest

from lmptopo.batch import (RecoveryParams, average_degree,
                           normalize_and_threshold, run_batch)
from lmptopo.experiments import SwapEvent, evaluate, run_tracking_experiment
from lmptopo.grid import GridTopology, Line, build_matrices
from lmptopo.market import (OfferCurve, clear_market, expand_blocks,
                            write_price_matrix_csv)
from lmptopo.online import OnlineParams, OnlineState, step_huber, step_l1
from lmptopo.prox import (HuberParams, huber_row_prox, l1_row_prox,
                          psd_logdet_prox, soft_threshold)
from lmptopo.scenario import ScenarioConfig, simulate
from lmptopo.simplex import InfeasibleError, solve_bounded_lp
from oracles import (batched_gradient_huber, batched_subgradient_l1,
                     enumerate_lp, huber_objective, l1_objective,
                     logdet_stationarity, minimize_online_step,
                     online_objective, soft_threshold_grid)


def verdict(num: int, ok: bool, detail: str) -> None:
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'} - {detail}",
          flush=True)


def rel_gap(f, f_ref):
    return (f - f_ref) / (1.0 + abs(f_ref))


# ---------------------------------------------------------------- criterion 1

def test_criterion_1_prox_kernels_match_oracles():
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0

    # l1 row prox vs batched subgradient descent (one-sided: the oracle
    # sits slightly above the optimum, a wrong closed form sits far above).
    Ys = rng.normal(size=(100, 6, 6))
    zs = rng.normal(size=(100, 6)) * rng.uniform(0.2, 3.0, size=(100, 1))
    closed = np.stack([l1_row_prox(Y, z) for Y, z in zip(Ys, zs)])
    _, f_oracle = batched_subgradient_l1(Ys, zs)
    for k in range(100):
        gap = rel_gap(l1_objective(closed[k], Ys[k], zs[k]), f_oracle[k])
        worst = max(worst, gap)

    # Huber row prox vs batched gradient descent, two batches of 50.
    for kappa, alpha, seed in ((0.7, 0.9, 1), (2.0, 0.35, 2)):
        rng_h = np.random.default_rng(seed)
        Ys = rng_h.normal(size=(50, 6, 6))
        zs = rng_h.normal(size=(50, 6)) * rng_h.uniform(0.2, 3.0, size=(50, 1))
        hp = HuberParams(kappa=kappa, alpha=alpha)
        closed = np.stack([huber_row_prox(Y, z, hp) for Y, z in zip(Ys, zs)])
        _, f_oracle = batched_gradient_huber(Ys, zs, kappa, alpha,
                                             iters=30_000)
        for k in range(50):
            gap = abs(rel_gap(
                huber_objective(closed[k], Ys[k], zs[k], kappa, alpha),
                f_oracle[k]))
            worst = max(worst, gap)

    # log-det projection: stationarity residual of the closed form.
    worst_stat = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 7))
        X = rng.normal(size=(n, n))
        alpha = float(rng.uniform(0.1, 2.0))
        B = psd_logdet_prox(X, alpha)
        worst_stat = max(worst_stat, logdet_stationarity(B, X, alpha))

    # scalar soft threshold vs dense grid search.
    for _ in range(100):
        x = float(rng.uniform(-4.0, 4.0))
        beta = float(rng.uniform(0.0, 2.0))
        u = float(soft_threshold(x, beta))
        g = soft_threshold_grid(x, beta)
        gap = abs(rel_gap(beta * abs(u) + 0.5 * (u - x) ** 2,
                          beta * abs(g) + 0.5 * (g - x) ** 2))
        worst = max(worst, gap)

    elapsed = time.perf_counter() - start
    ok = worst <= 1e-5 and worst_stat <= 1e-8 and elapsed < 30.0
    verdict(1, ok, f"objective gap {worst:.2e} (<=1e-5), stationarity "
                   f"{worst_stat:.2e} (<=1e-8), {elapsed:.1f}s (<30s)")
    assert worst <= 1e-5
    assert worst_stat <= 1e-8
    assert elapsed < 30.0


# ---------------------------------------------------------------- criterion 2

def random_dispatch(rng):
    """Random connected grid with offers and loads; may be infeasible."""
    n = int(rng.integers(3, 11))
    lines = []
    for v in range(1, n):
        u = int(rng.integers(0, v))
        lines.append(Line(u, v, float(rng.uniform(0.2, 1.5)),
                          float(rng.uniform(5.0, 40.0))))
    for _ in range(int(rng.integers(0, 3))):
        u, v = sorted(rng.choice(n, size=2, replace=False).tolist())
        if all((ln.from_bus, ln.to_bus) != (u, v) for ln in lines):
            lines.append(Line(u, v, float(rng.uniform(0.2, 1.5)),
                              float(rng.uniform(5.0, 40.0))))
    matrices = build_matrices(GridTopology(n, tuple(lines)))
    gens = rng.choice(n, size=max(2, n // 3), replace=False)
    offers = [OfferCurve(int(g), ((float(rng.uniform(10, 40)),
                                   float(rng.uniform(5, 50))),))
              for g in gens]
    loads = np.zeros(n)
    for b in range(n):
        if b not in gens and rng.random() < 0.7:
            loads[b] = float(rng.uniform(1.0, 15.0))
    return matrices, offers, loads


def dispatch_lp_arrays(matrices, instance):
    """The dispatch LP exactly as the market module assembles it."""
    nv = len(instance.costs)
    nl = matrices.topology.line_count
    fmax = matrices.topology.flow_limits
    G = matrices.shift_factors[:, instance.block_to_bus]
    A = np.zeros((1 + nl, nv + nl))
    A[0, :nv] = 1.0
    A[1:, :nv] = G
    A[1:, nv:] = -np.eye(nl)
    c = np.concatenate([instance.costs, np.zeros(nl)])
    lb = np.concatenate([instance.lower_bounds, -fmax])
    ub = np.concatenate([instance.upper_bounds, fmax])
    return c, A, np.zeros(1 + nl), lb, ub, nv


def test_criterion_2_lp_duals_and_enumeration():
    start = time.perf_counter()
    rng = np.random.default_rng(202)
    worst_kkt = worst_slack = 0.0
    checked = 0
    while checked < 100:
        matrices, offers, loads = random_dispatch(rng)
        inst = expand_blocks(offers, loads)
        c, A, b, lb, ub, nv = dispatch_lp_arrays(matrices, inst)
        try:
            res = solve_bounded_lp(c, A, b, lb, ub)
        except InfeasibleError:
            continue
        checked += 1
        scale = max(1.0, np.abs(c).max(), np.abs(res.duals).max())

        # KKT: primal feasibility, sign-correct reduced costs, zero gap.
        feas = np.abs(A @ res.x - b).max()
        d = res.reduced_costs(c, A)
        stat = 0.0
        for j in range(len(c)):
            at_lower = abs(res.x[j] - lb[j]) < 1e-7
            at_upper = abs(res.x[j] - ub[j]) < 1e-7
            if at_lower and at_upper:
                continue
            if at_lower:
                stat = max(stat, -d[j])
            elif at_upper:
                stat = max(stat, d[j])
            else:
                stat = max(stat, abs(d[j]))
        dual_obj = res.duals @ b + np.maximum(d, 0.0) @ lb \
            + np.minimum(d, 0.0) @ ub
        gap = abs(res.objective - dual_obj)
        worst_kkt = max(worst_kkt, max(feas, stat, gap) / scale)

        # complementary slackness of the flow duals.
        flows = res.x[nv:]
        mu = res.duals[1:]
        fmax = matrices.topology.flow_limits
        slack = (np.abs(mu) * (fmax - np.abs(flows))).max() if len(mu) else 0.0
        worst_slack = max(worst_slack, slack / scale)

    # tiny dispatch LPs (<= 6 variables) against vertex enumeration.
    worst_enum = 0.0
    rng = np.random.default_rng(404)
    enumerated = 0
    while enumerated < 20:
        fmax = float(rng.uniform(5.0, 40.0))
        matrices = build_matrices(
            GridTopology(2, (Line(0, 1, float(rng.uniform(0.2, 1.5)), fmax),)))
        offers = [OfferCurve(0, ((float(rng.uniform(10, 40)),
                                  float(rng.uniform(5, 30))),)),
                  OfferCurve(1, ((float(rng.uniform(10, 40)),
                                  float(rng.uniform(20, 50))),))]
        loads = np.array([0.0, float(rng.uniform(1.0, 25.0))])
        inst = expand_blocks(offers, loads)
        c, A, b, lb, ub, _ = dispatch_lp_arrays(matrices, inst)
        try:
            res = solve_bounded_lp(c, A, b, lb, ub)
        except InfeasibleError:
            continue
        enumerated += 1
        best, _ = enumerate_lp(c, A, b, lb, ub)
        worst_enum = max(worst_enum, abs(res.objective - best))

    elapsed = time.perf_counter() - start
    ok = (worst_kkt <= 1e-6 and worst_slack <= 1e-6
          and worst_enum <= 1e-8 and elapsed < 60.0)
    verdict(2, ok, f"KKT {worst_kkt:.2e} (<=1e-6), slackness "
                   f"{worst_slack:.2e} (<=1e-6), enumeration gap "
                   f"{worst_enum:.2e} (<=1e-8), {elapsed:.1f}s (<60s)")
    assert worst_kkt <= 1e-6
    assert worst_slack <= 1e-6
    assert worst_enum <= 1e-8
    assert elapsed < 60.0


# ---------------------------------------------------------------- criterion 3

CRIT3_KAPPA1 = [0.01, 0.1]
CRIT3_KAPPA2 = [0.1, 0.3, 1.0]


def random_small_grid(rng):
    """Connected 7-10 bus grid; the non-reference part stays irreducible."""
    n = int(rng.integers(7, 11))
    lines = [Line(0, 1, float(rng.uniform(0.4, 1.6)), 10.0)]
    edges = {(0, 1)}
    for v in range(2, n):
        u = int(rng.integers(1, v))
        lines.append(Line(u, v, float(rng.uniform(0.4, 1.6)), 10.0))
        edges.add((u, v))
    extra = int(rng.integers(1, 4))
    while extra > 0:
        u, v = sorted(rng.choice(n, size=2, replace=False).tolist())
        if (u, v) not in edges:
            edges.add((u, v))
            lines.append(Line(u, v, float(rng.uniform(0.4, 1.6)), 10.0))
            extra -= 1
    return GridTopology(n, tuple(lines))


def rotating_congestion_prices(rng, matrices, t=60):
    """Noiseless price columns from 1-3 random congested lines per interval."""
    nl = matrices.topology.line_count
    cols = []
    for _ in range(t):
        k = int(rng.integers(1, 4))
        mu = np.zeros(nl)
        idx = rng.choice(nl, size=k, replace=False)
        mu[idx] = rng.uniform(5.0, 30.0, size=k) \
            * rng.choice([-1.0, 1.0], size=k)
        s = matrices.reduced_incidence.T @ matrices.reactance_diag @ mu
        cols.append(matrices.laplacian_inverse @ s)
    return np.column_stack(cols)


@pytest.fixture(scope="module")
def crit3_runs():
    start = time.perf_counter()
    f1s, instances = [], []
    for seed in range(10):
        rng = np.random.default_rng(seed)
        topology = random_small_grid(rng)
        matrices = build_matrices(topology)
        Pi = rotating_congestion_prices(rng, matrices)
        true_adj = matrices.reduced_laplacian != 0.0
        np.fill_diagonal(true_adj, False)
        target = float(true_adj.sum(axis=1).mean())
        best = None
        for k1 in CRIT3_KAPPA1:
            for k2 in CRIT3_KAPPA2:
                params = RecoveryParams(kappa1=k1, kappa2=k2, rho=100.0,
                                        max_iters=8000, primal_tol=0.0,
                                        threshold_tau=0.05)
                result = run_batch(Pi, params)
                instances.append((result.state, Pi))
                report = evaluate(result.B_hat, topology, tau=0.05)
                gap = abs(report.avg_degree - target)
                if best is None or gap < best[0]:
                    best = (gap, report.edge_f1)
        f1s.append(best[1])
    return SimpleNamespace(f1s=f1s, instances=instances,
                           elapsed=time.perf_counter() - start)


def test_criterion_3_noiseless_recovery(crit3_runs):
    passes = sum(f1 >= 0.9 for f1 in crit3_runs.f1s)
    ok = passes >= 8 and crit3_runs.elapsed < 300.0
    verdict(3, ok, f"{passes}/10 seeds with degree-tuned F1 >= 0.9 "
                   f"(need >= 8), {crit3_runs.elapsed:.0f}s (<300s)")
    assert passes >= 8
    assert crit3_runs.elapsed < 300.0


# ---------------------------------------------------------------- criterion 4

CRIT4_KAPPA1 = [0.001, 0.1, 1.0]
CRIT4_KAPPA2 = [0.1, 1.0, 10.0]


@pytest.fixture(scope="module")
def thirty_bus_day():
    start = time.perf_counter()
    config = ScenarioConfig(seed=1, days=1)
    pm, _ = simulate(config)
    return SimpleNamespace(values=pm.values,
                           elapsed=time.perf_counter() - start)


@pytest.fixture(scope="module")
def crit4_runs(thirty_bus_day):
    start = time.perf_counter()
    Pi = thirty_bus_day.values
    table = np.zeros((len(CRIT4_KAPPA1), len(CRIT4_KAPPA2)))
    instances = []
    for i, k1 in enumerate(CRIT4_KAPPA1):
        for j, k2 in enumerate(CRIT4_KAPPA2):
            params = RecoveryParams(kappa1=k1, kappa2=k2, rho=100.0,
                                    max_iters=20000, primal_tol=0.0)
            result = run_batch(Pi, params)
            instances.append((result.state, Pi))
            _, adj = normalize_and_threshold(result.B_hat)
            table[i, j] = average_degree(adj)
    default = run_batch(Pi, RecoveryParams())   # rho=1e4, residual rule on
    instances.append((default.state, Pi))
    elapsed = time.perf_counter() - start + thirty_bus_day.elapsed
    return SimpleNamespace(table=table, default=default, Pi=Pi,
                           instances=instances, elapsed=elapsed)


def test_criterion_4_thirty_bus_replication(crit4_runs):
    table = crit4_runs.table
    monotone = bool(np.all(np.diff(table, axis=1) >= -1e-9))
    dense_col = float(table[:, -1].min())
    center = float(table[CRIT4_KAPPA1.index(1.0), CRIT4_KAPPA2.index(1.0)])
    default = crit4_runs.default
    tol = 1e-4 * np.linalg.norm(crit4_runs.Pi)
    final_res = max(default.residual_history[-1])
    ok = (monotone and dense_col >= 3.5 and 2.0 <= center <= 3.5
          and default.converged and default.iterations <= 5000
          and final_res <= tol and crit4_runs.elapsed < 900.0)
    verdict(4, ok, f"degree table rows nondecreasing={monotone}, dense "
                   f"column >= {dense_col:.2f}, degree at (1,1) = "
                   f"{center:.2f} (in [2.0, 3.5]), default-rho residual "
                   f"{final_res:.2e} <= {tol:.2e} in {default.iterations} "
                   f"iters, {crit4_runs.elapsed:.0f}s (<900s)")
    assert monotone
    assert dense_col >= 3.5
    assert 2.0 <= center <= 3.5
    assert default.converged and default.iterations <= 5000
    assert final_res <= tol
    assert crit4_runs.elapsed < 900.0


# ---------------------------------------------------------------- criterion 5

def test_criterion_5_feasibility_on_all_instances(crit3_runs, crit4_runs):
    worst_data = worst_box = worst_consensus = 0.0
    min_eig = np.inf
    count = 0
    for state, Pi in crit3_runs.instances + crit4_runs.instances:
        count += 1
        tol = 1e-4 * np.linalg.norm(Pi)
        n = state.B1.shape[0]
        data_res = np.linalg.norm(state.B1 @ Pi - state.S) / (10.0 * tol)
        box = float(np.max(state.B2 - np.eye(n)))
        cons = max(np.linalg.norm(state.B1 - state.B2),
                   np.linalg.norm(state.B1 - state.B3)) / (10.0 * tol)
        eig = float(np.linalg.eigvalsh(0.5 * (state.B3 + state.B3.T)).min())
        worst_data = max(worst_data, data_res)
        worst_box = max(worst_box, box)
        worst_consensus = max(worst_consensus, cons)
        min_eig = min(min_eig, eig)
    ok = (worst_data <= 1.0 and worst_box <= 1e-6
          and worst_consensus <= 1.0 and min_eig > 0.0)
    verdict(5, ok, f"{count} instances: data residual <= {worst_data:.3f} "
                   f"of 10*tol, box overshoot {worst_box:.2e} (<=1e-6), "
                   f"consensus <= {worst_consensus:.3f} of 10*tol, "
                   f"min eig(B3) {min_eig:.2e} (> 0)")
    assert worst_data <= 1.0
    assert worst_box <= 1e-6
    assert worst_consensus <= 1.0
    assert min_eig > 0.0


# ---------------------------------------------------------------- criterion 6

def random_online_state(rng, n):
    B1 = np.eye(n) + 0.3 * rng.normal(size=(n, n))
    state = OnlineState(B1=B1,
                        B2=np.minimum(B1 + 0.1 * rng.normal(size=(n, n)),
                                      np.eye(n)),
                        B3=B1 + 0.1 * rng.normal(size=(n, n)),
                        M12=0.1 * rng.normal(size=(n, n)),
                        M13=0.1 * rng.normal(size=(n, n)))
    return state


def test_criterion_6_online_step_matches_objective_minimizer():
    start = time.perf_counter()
    rng = np.random.default_rng(606)
    n = 4                       # reduced size of a 5-bus grid
    worst = -np.inf
    worst_two_sided = 0.0
    for _ in range(50):
        params = OnlineParams(kappa1=float(rng.uniform(0.5, 2.0)),
                              kappa2=float(rng.uniform(0.5, 2.0)),
                              kappa3=float(rng.uniform(0.4, 1.5)),
                              horizon_T=int(rng.integers(40, 400)),
                              rho=float(rng.uniform(2.0, 8.0)),
                              eta=float(rng.uniform(2.0, 8.0)))
        prev = random_online_state(rng, n)
        price = rng.normal(size=n) * float(rng.uniform(0.5, 3.0))
        for loss, stepper in (("l1", step_l1), ("huber", step_huber)):
            stepped = stepper(copy.deepcopy(prev), price, params)
            f_closed = online_objective(stepped.B1, price, prev, params, loss)
            _, f_oracle = minimize_online_step(price, prev, params, loss,
                                               iters=15_000)
            gap = rel_gap(f_closed, f_oracle)
            worst = max(worst, gap)
            worst_two_sided = max(worst_two_sided, abs(gap))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-5 and worst_two_sided <= 5e-3 and elapsed < 120.0
    verdict(6, ok, f"one-sided objective gap {worst:.2e} (<=1e-5), "
                   f"oracle agreement {worst_two_sided:.2e} (<=5e-3), "
                   f"{elapsed:.0f}s (<120s)")
    assert worst <= 1e-5
    assert worst_two_sided <= 5e-3
    assert elapsed < 120.0


# ---------------------------------------------------------------- criterion 7

def test_criterion_7_tracking_detects_line_swap():
    start = time.perf_counter()
    days = 8
    config = ScenarioConfig(seed=1, days=days)
    swap_t = 4 * config.intervals_per_day
    horizon = 110 * days        # expected congested interval count
    rate = float(np.sqrt(horizon))
    online = OnlineParams(horizon_T=horizon, rho=rate, eta=rate)
    swap = SwapEvent(interval=swap_t,
                     lines_out=[(22, 23), (7, 27)],
                     lines_in=[Line(22, 25, 0.27, 16.0),
                               Line(7, 28, 0.0649, 32.0)])
    persistent = (13, 14)
    watch = [(22, 23), (22, 25), (7, 27), (7, 28), persistent]
    result = run_tracking_experiment(config, swap, watch, online=online)

    det = result.detection
    budget = int(0.4 * det["post_event_congested"])
    latencies = {}
    for pair in watch[:4]:
        entry = det[f"{pair[0]}-{pair[1]}"]
        latencies[pair] = entry["latency_congested"]
    col = watch.index(persistent)
    persistent_min = float(result.trace[:, col].min())
    elapsed = time.perf_counter() - start

    detected = all(lat is not None and lat <= budget
                   for lat in latencies.values())
    ok = detected and persistent_min > 0.01 and elapsed < 600.0
    verdict(7, ok, f"swap latencies {latencies} congested intervals "
                   f"(budget {budget}), persistent entry min "
                   f"{persistent_min:.3f} (> 0.01), {elapsed:.0f}s (<600s)")
    assert detected
    assert persistent_min > 0.01
    assert elapsed < 600.0


# ---------------------------------------------------------------- criterion 8

def test_criterion_8_determinism(tmp_path):
    config = ScenarioConfig(seed=7, days=1, intervals_per_day=24)
    paths = []
    reports = []
    for tag in ("a", "b"):
        pm, _ = simulate(config)
        path = tmp_path / f"prices_{tag}.csv"
        write_price_matrix_csv(pm, path)
        paths.append(path)
        result = run_batch(pm.values,
                           RecoveryParams(rho=100.0, max_iters=300,
                                          primal_tol=0.0))
        reports.append((result.B_hat.tobytes(), result.iterations,
                        repr(result.residual_history[-1])))
    identical = (paths[0].read_bytes() == paths[1].read_bytes()
                 and reports[0] == reports[1])
    verdict(8, identical, "repeated runs byte-identical: prices CSV and "
                          "recovery report")
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert reports[0] == reports[1]
