"""Bounded-variable primal simplex with dual extraction.

Solves  min c'x  s.t.  A x = b,  lb <= x <= ub  on small dense problems,
returning the optimal basis duals alongside the primal solution. Bland's
rule is used throughout, so cycling cannot occur.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_AT_LOWER = 0
_AT_UPPER = 1
_BASIC = 2


class LpError(Exception):
    pass


class InfeasibleError(LpError):
    """No point satisfies the constraints."""


class UnboundedError(LpError):
    """The objective decreases without bound."""


@dataclass
class LpResult:
    x: np.ndarray
    duals: np.ndarray          # one multiplier per equality row
    objective: float
    iterations: int
    degenerate: bool           # optimal basis has a basic variable at a bound

    def reduced_costs(self, c: np.ndarray, A: np.ndarray) -> np.ndarray:
        return np.asarray(c, dtype=float) - np.asarray(A, dtype=float).T @ self.duals


def solve_bounded_lp(c, A, b, lb, ub, tol: float = 1e-9,
                     max_iters: int = 20000) -> LpResult:
    """Two-phase simplex for min c'x s.t. Ax=b, lb<=x<=ub.

    Box bounds must be finite for the decision variables; artificial
    variables are handled internally. Raises InfeasibleError on an empty
    feasible set and UnboundedError on an unbounded ray.
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    m, n = A.shape
    if np.any(lb > ub + tol):
        raise InfeasibleError("empty box")

    # Phase 1: artificial variables patch the residual of an all-at-lower start.
    r = b - A @ lb
    sgn = np.where(r >= 0, 1.0, -1.0)
    A1 = np.hstack([A, np.diag(sgn)])
    lb1 = np.concatenate([lb, np.zeros(m)])
    ub1 = np.concatenate([ub, np.full(m, np.inf)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    status = np.full(n + m, _AT_LOWER)
    status[n:] = _BASIC
    basis = list(range(n, n + m))

    x, it1 = _iterate(c1, A1, b, lb1, ub1, status, basis, tol, max_iters)
    if c1 @ x > 1e-7 * (1.0 + np.abs(b).sum()):
        raise InfeasibleError("phase-1 optimum is positive")

    # Phase 2: freeze artificials at zero and optimize the true objective.
    ub1[n:] = 0.0
    c2 = np.concatenate([c, np.zeros(m)])
    x, it2 = _iterate(c2, A1, b, lb1, ub1, status, basis, tol, max_iters)

    Bmat = A1[:, basis]
    y = np.linalg.solve(Bmat.T, c2[basis])
    xs = x[:n]
    real_basic = [j for j in basis if j < n]
    degenerate = bool(real_basic) and bool(np.any(
        np.minimum(xs[real_basic] - lb[real_basic],
                   ub[real_basic] - xs[real_basic]) < 1e-7))
    return LpResult(x=xs, duals=y, objective=float(c @ xs),
                    iterations=it1 + it2, degenerate=degenerate)


def _iterate(c, A, b, lb, ub, status, basis, tol, max_iters):
    """Run primal simplex pivots; returns (x, iteration count).

    Nonbasic variables sit exactly on a bound; basic values are re-solved
    from the basis every iteration to avoid drift.
    """
    m, nall = A.shape

    def current_x():
        x = np.where(status == _AT_UPPER, np.where(np.isfinite(ub), ub, 0.0), lb)
        x[basis] = 0.0
        xb = np.linalg.solve(A[:, basis], b - A @ x)
        x[basis] = xb
        return x

    for it in range(max_iters):
        Bmat = A[:, basis]
        x = current_x()
        y = np.linalg.solve(Bmat.T, c[basis])
        d = c - A.T @ y

        enter = -1
        direction = 0.0
        for j in range(nall):
            if status[j] == _AT_LOWER and d[j] < -tol and ub[j] > lb[j]:
                enter, direction = j, 1.0
                break
            if status[j] == _AT_UPPER and d[j] > tol and ub[j] > lb[j]:
                enter, direction = j, -1.0
                break
        if enter < 0:
            return x, it

        w = np.linalg.solve(Bmat, A[:, enter])
        step = ub[enter] - lb[enter]      # bound-flip cap, may be inf
        leave = -1
        leave_to = _AT_LOWER
        for i in range(m):
            delta = direction * w[i]
            bi = basis[i]
            if delta > tol:
                room = (x[bi] - lb[bi]) / delta
                bound = _AT_LOWER
            elif delta < -tol:
                room = (ub[bi] - x[bi]) / (-delta) if np.isfinite(ub[bi]) else np.inf
                bound = _AT_UPPER
            else:
                continue
            room = max(room, 0.0)
            if room < step - tol or (room < step + tol and leave >= 0
                                     and bi < basis[leave]):
                step = room
                leave = i
                leave_to = bound
        if not np.isfinite(step):
            raise UnboundedError("unbounded ray in simplex")

        if leave < 0:
            # Bound flip: entering variable crosses to its other bound.
            status[enter] = _AT_UPPER if direction > 0 else _AT_LOWER
        else:
            out = basis[leave]
            status[out] = leave_to
            basis[leave] = enter
            status[enter] = _BASIC
    raise LpError("simplex iteration limit reached")
