"""Network-constrained economic dispatch and price extraction.

Clears the 5-minute dispatch LP, reads the balance/flow duals off the
optimal basis, and assembles LMP vectors and the reference-subtracted
congestion-price matrix consumed by the recovery algorithms.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .grid import GridMatrices
from .simplex import InfeasibleError, solve_bounded_lp


class MarketError(Exception):
    pass


class NonConvexOfferError(MarketError):
    """Block prices decrease within one offer curve."""


class EmptyHorizonError(MarketError):
    """No market interval survived the retention policy."""


@dataclass(frozen=True)
class OfferCurve:
    """Multi-block generation offer at one bus: (quantity MWh, price $/MWh)."""

    bus: int
    blocks: tuple[tuple[float, float], ...]

    def __post_init__(self):
        prices = [p for _, p in self.blocks]
        if any(q <= 0 for q, _ in self.blocks):
            raise NonConvexOfferError(f"nonpositive block quantity at bus {self.bus}")
        if any(b > a for b, a in zip(prices, prices[1:])):
            raise NonConvexOfferError(f"decreasing block prices at bus {self.bus}")


@dataclass(frozen=True)
class MarketInstance:
    """Expanded per-block LP data for one interval.

    One variable per offer block plus one equality-bounded variable per
    fixed load (encoded as a negative injection).
    """

    costs: np.ndarray
    lower_bounds: np.ndarray
    upper_bounds: np.ndarray
    block_to_bus: np.ndarray      # bus index per expanded variable

    def __post_init__(self):
        if np.any(self.lower_bounds > self.upper_bounds):
            raise MarketError("lower bound exceeds upper bound")


@dataclass
class DispatchOutcome:
    """Primal/dual outcome of one cleared interval."""

    injections: np.ndarray        # MW per bus
    lambda0: float                # marginal energy component, $/MWh
    mu: np.ndarray                # flow duals, mu_lower - mu_upper, per line
    flows: np.ndarray             # MW per line, signed
    lmp: np.ndarray               # $/MWh per bus
    mcc: np.ndarray               # reference-subtracted prices, non-ref buses
    congested: set[int]
    status: str                   # "feasible" | "infeasible" | "uncongested"
    noise: np.ndarray = None      # loss-component noise added to the LMPs
    degenerate: bool = False


@dataclass
class PriceMatrix:
    """N x T matrix of retained congestion price vectors."""

    values: np.ndarray
    interval_ids: list[int] = field(default_factory=list)


def expand_blocks(offers: list[OfferCurve], loads: np.ndarray) -> MarketInstance:
    """Expand multi-block offers and fixed loads into LP box variables.

    Block bounds use the incremental form 0 <= p_k <= qty_k; a fixed load
    of d MW at a bus becomes a variable pinned at -d.
    """
    costs, lo, hi, bus = [], [], [], []
    for offer in offers:
        for qty, price in offer.blocks:
            costs.append(price)
            lo.append(0.0)
            hi.append(qty)
            bus.append(offer.bus)
    loads = np.asarray(loads, dtype=float)
    for b, demand in enumerate(loads):
        if demand != 0.0:
            costs.append(0.0)
            lo.append(-demand)
            hi.append(-demand)
            bus.append(b)
    return MarketInstance(np.array(costs), np.array(lo), np.array(hi),
                          np.array(bus, dtype=int))


def solve_lp_with_duals(c, lb, ub, bus_of_var, matrices: GridMatrices):
    """Solve the dispatch LP and return (x, lambda0, mu, flows, degenerate).

    Rows are the power balance plus one flow-definition row per line with
    a slack bounded by +-fmax; duals come from the terminating basis.
    """
    c = np.asarray(c, dtype=float)
    nv = len(c)
    nl = matrices.topology.line_count
    fmax = matrices.topology.flow_limits

    G = matrices.shift_factors[:, bus_of_var]          # L x nv
    A = np.zeros((1 + nl, nv + nl))
    A[0, :nv] = 1.0                                    # balance row
    A[1:, :nv] = G
    A[1:, nv:] = -np.eye(nl)                           # flow slacks
    b = np.zeros(1 + nl)
    call = np.concatenate([c, np.zeros(nl)])
    lball = np.concatenate([lb, -fmax])
    uball = np.concatenate([ub, fmax])

    res = solve_bounded_lp(call, A, b, lball, uball)
    x = res.x[:nv]
    flows = res.x[nv:]
    lambda0 = float(res.duals[0])
    mu = res.duals[1:].copy()
    return x, lambda0, mu, flows, res.degenerate


def clear_market(instance: MarketInstance, matrices: GridMatrices,
                 mlc_sigma: float = 0.0, rng: np.random.Generator | None = None,
                 congestion_tol: float = 1e-6) -> DispatchOutcome:
    """Clear one interval; returns a DispatchOutcome (possibly infeasible)."""
    n = matrices.topology.bus_count
    try:
        x, lambda0, mu, flows, degenerate = solve_lp_with_duals(
            instance.costs, instance.lower_bounds, instance.upper_bounds,
            instance.block_to_bus, matrices)
    except InfeasibleError:
        nl = matrices.topology.line_count
        return DispatchOutcome(
            injections=np.zeros(n), lambda0=np.nan, mu=np.zeros(nl),
            flows=np.zeros(nl), lmp=np.full(n, np.nan),
            mcc=np.full(n - 1, np.nan), congested=set(), status="infeasible")

    injections = np.bincount(instance.block_to_bus, weights=x, minlength=n)
    fmax = matrices.topology.flow_limits
    congested = {l for l in range(len(fmax))
                 if abs(flows[l]) >= fmax[l] - congestion_tol}

    s = matrices.reduced_incidence.T @ matrices.reactance_diag @ mu
    mcc_clean = matrices.laplacian_inverse @ s

    noise = np.zeros(n)
    if mlc_sigma > 0.0:
        if rng is None:
            rng = np.random.default_rng()
        noise = rng.normal(0.0, mlc_sigma, size=n)

    ref = matrices.topology.reference_bus
    lmp = np.full(n, lambda0) + noise
    keep = matrices.non_reference_buses
    lmp[keep] += mcc_clean

    mcc_obs = mcc_clean + noise[keep] - noise[ref]
    status = "feasible" if congested else "uncongested"
    return DispatchOutcome(
        injections=injections, lambda0=lambda0, mu=mu, flows=flows,
        lmp=lmp, mcc=mcc_obs, congested=congested, status=status,
        noise=noise, degenerate=degenerate)


def subtract_reference(lmp: np.ndarray, reference_bus: int = 0) -> np.ndarray:
    """Remove the energy component by subtracting the reference-bus price."""
    lmp = np.asarray(lmp, dtype=float)
    shifted = lmp - lmp[reference_bus]
    return np.delete(shifted, reference_bus)


def assemble_price_matrix(outcomes: list[DispatchOutcome],
                          drop_uncongested: bool = True) -> PriceMatrix:
    """Stack retained congestion price vectors into an N x T matrix.

    Infeasible intervals are always dropped; uncongested ones per policy.
    """
    cols, ids = [], []
    for t, out in enumerate(outcomes):
        if out.status == "infeasible":
            continue
        if drop_uncongested and out.status == "uncongested":
            continue
        cols.append(out.mcc)
        ids.append(t)
    if not cols:
        raise EmptyHorizonError("no intervals retained")
    return PriceMatrix(np.column_stack(cols), ids)


def load_offers_file(path) -> list[OfferCurve]:
    """Read the offers JSON file: {"offers": [{"bus": i, "blocks": [[q, p], ...]}]}."""
    with open(path) as fh:
        data = json.load(fh)
    return [OfferCurve(int(o["bus"]), tuple((float(q), float(p)) for q, p in o["blocks"]))
            for o in data["offers"]]


def write_price_matrix_csv(pm: PriceMatrix, path) -> None:
    """Write the N x T price matrix; header row carries the interval ids."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(pm.interval_ids)
        for row in pm.values:
            w.writerow([repr(float(v)) for v in row])


def read_price_matrix_csv(path) -> PriceMatrix:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    ids = [int(v) for v in rows[0]]
    values = np.array([[float(v) for v in row] for row in rows[1:]])
    return PriceMatrix(values, ids)
