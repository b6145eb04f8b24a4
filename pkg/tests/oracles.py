"""Independent numerical minimizers used to certify closed-form kernels.

Everything here is deliberately brute force: batched subgradient or
gradient descent over stacked instances, scalar grid search, and basic
feasible solution enumeration for tiny LPs. None of it shares code with
the library under test.
"""

from __future__ import annotations

import itertools

import numpy as np


def l1_objective(X, Y, z):
    return np.abs(X @ z).sum() + 0.5 * np.linalg.norm(X - Y) ** 2


def huber_scalar(x, kappa):
    ax = np.abs(x)
    return np.where(ax <= kappa, 0.5 * x * x, kappa * ax - 0.5 * kappa * kappa)


def huber_objective(X, Y, z, kappa, alpha):
    return alpha * huber_scalar(X @ z, kappa).sum() \
        + 0.5 * np.linalg.norm(X - Y) ** 2


def batched_subgradient_l1(Ys, zs, iters=100_000):
    """Minimize ||X z||_1 + 0.5 ||X - Y||_F^2 for a stack of instances.

    Ys: K x M x N, zs: K x N. Subgradient descent with 1/(k+1) steps
    (valid for the 1-strongly-convex objective), keeping the best
    iterate per instance.
    """
    X = Ys.copy()
    best_obj = np.full(len(Ys), np.inf)
    best_X = X.copy()
    for k in range(iters):
        Xz = np.einsum("kmn,kn->km", X, zs)
        obj = np.abs(Xz).sum(axis=1) \
            + 0.5 * ((X - Ys) ** 2).sum(axis=(1, 2))
        better = obj < best_obj
        best_obj[better] = obj[better]
        best_X[better] = X[better]
        grad = np.einsum("km,kn->kmn", np.sign(Xz), zs) + (X - Ys)
        X = X - grad / (k + 1.0)
    return best_X, best_obj


def batched_gradient_huber(Ys, zs, kappa, alpha, iters=100_000):
    """Minimize alpha*h_kappa(X z) + 0.5||X - Y||_F^2, batched.

    Smooth objective; fixed step 1/L with L = 1 + alpha*max||z||^2.
    """
    X = Ys.copy()
    L = 1.0 + alpha * (zs ** 2).sum(axis=1).max()
    step = 1.0 / L
    for _ in range(iters):
        Xz = np.einsum("kmn,kn->km", X, zs)
        hprime = np.clip(Xz, -kappa, kappa)
        grad = alpha * np.einsum("km,kn->kmn", hprime, zs) + (X - Ys)
        X = X - step * grad
    obj = alpha * huber_scalar(np.einsum("kmn,kn->km", X, zs), kappa)\
        .sum(axis=1) + 0.5 * ((X - Ys) ** 2).sum(axis=(1, 2))
    return X, obj


def soft_threshold_grid(x, beta, width=3.0, points=2_000_001):
    """argmin_u beta|u| + 0.5 (u - x)^2 on a dense scalar grid."""
    u = np.linspace(x - width, x + width, points)
    return u[np.argmin(beta * np.abs(u) + 0.5 * (u - x) ** 2)]


def logdet_stationarity(B, X, alpha):
    """||B - sym(X) - alpha B^{-1}||_F for the log-det prox optimality."""
    sym = 0.5 * (X + X.T)
    return np.linalg.norm(B - sym - alpha * np.linalg.inv(B))


def enumerate_lp(c, A, b, lb, ub, tol=1e-9):
    """Optimal value of min c'x s.t. Ax = b, lb <= x <= ub by enumerating
    basic feasible solutions. Exponential; only for tiny instances.
    """
    c = np.asarray(c, float)
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    m, n = A.shape
    best = np.inf
    best_x = None
    for basis in itertools.combinations(range(n), m):
        Ab = A[:, basis]
        if abs(np.linalg.det(Ab)) < 1e-12:
            continue
        nonbasic = [j for j in range(n) if j not in basis]
        for corners in itertools.product(*[(lb[j], ub[j]) for j in nonbasic]):
            x = np.empty(n)
            for j, v in zip(nonbasic, corners):
                x[j] = v
            rhs = b - A[:, nonbasic] @ np.array(corners) if nonbasic else b
            xb = np.linalg.solve(Ab, rhs)
            x[list(basis)] = xb
            if np.all(x >= lb - tol) and np.all(x <= ub + tol):
                val = c @ x
                if val < best - 1e-12:
                    best = val
                    best_x = x
    return best, best_x


def quadratic_matrix_min(linear_terms):
    """Minimize sum_i w_i/2 ||X - C_i||_F^2 + <G, X>.

    ``linear_terms`` is (pairs, G) with pairs a list of (w_i, C_i).
    Closed form: X = (sum w_i C_i - G) / sum w_i. Used as the anchor
    oracle with the data term switched off.
    """
    pairs, G = linear_terms
    total = sum(w for w, _ in pairs)
    acc = sum(w * C for w, C in pairs) - G
    return acc / total


def online_objective(B, price, state_prev, params, loss):
    """Per-interval tracking objective for one candidate working copy."""
    n = B.shape[0]
    P = np.eye(n) - np.ones((n, n))
    rho, eta, T = params.rho, params.eta, params.horizon_T
    if loss == "l1":
        fit = np.abs(B @ price).sum()
    else:
        fit = huber_scalar(B @ price, params.kappa3).sum()
    return (fit
            + (params.kappa1 / T) * np.trace(P @ B)
            + 0.5 * rho * np.linalg.norm(B - state_prev.B2 + state_prev.M12) ** 2
            + 0.5 * rho * np.linalg.norm(B - state_prev.B3 + state_prev.M13) ** 2
            + 0.5 * eta * np.linalg.norm(B - state_prev.B1) ** 2)


def minimize_online_step(price, state_prev, params, loss,
                         iters=60_000) -> tuple[np.ndarray, float]:
    """Numerically minimize the per-interval objective over B.

    Subgradient descent with 1/(mu (k+1)) steps; the objective is
    (2 rho + eta)-strongly convex.
    """
    n = state_prev.B1.shape[0]
    P = np.eye(n) - np.ones((n, n))
    rho, eta, T = params.rho, params.eta, params.horizon_T
    mu = 2.0 * rho + eta
    B = state_prev.B1.copy()
    best_obj, best_B = np.inf, B.copy()
    for k in range(iters):
        obj = online_objective(B, price, state_prev, params, loss)
        if obj < best_obj:
            best_obj, best_B = obj, B.copy()
        Bp = B @ price
        if loss == "l1":
            fit_grad = np.outer(np.sign(Bp), price)
        else:
            fit_grad = np.outer(np.clip(Bp, -params.kappa3, params.kappa3),
                                price)
        grad = (fit_grad + (params.kappa1 / T) * P
                + rho * (B - state_prev.B2 + state_prev.M12)
                + rho * (B - state_prev.B3 + state_prev.M13)
                + eta * (B - state_prev.B1))
        B = B - grad / (mu * (k + 1.0))
    return best_B, best_obj
