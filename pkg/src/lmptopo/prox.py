"""Closed-form proximal and projection kernels.

All operations are pure functions on dense arrays: entrywise soft
thresholding, the log-det barrier projection onto the PSD cone, and the
rank-one prox maps for the l1 and Huber row costs ||X z||.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class HuberParams:
    """Huber knee ``kappa`` and prox weight ``alpha``; both > 0."""

    kappa: float
    alpha: float

    def __post_init__(self):
        if self.kappa <= 0 or self.alpha <= 0:
            raise ValueError("kappa and alpha must be strictly positive")


def soft_threshold(x, beta: float):
    """Entrywise shrinkage: x - beta*sign(x) if |x| > beta else 0."""
    if beta < 0:
        raise ValueError("threshold must be nonnegative")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - beta, 0.0)


def psd_logdet_prox(X: np.ndarray, alpha: float) -> np.ndarray:
    """Minimizer of 0.5*||X - B||_F^2 - alpha*log|B| over symmetric PD B.

    Computed from the symmetric eigendecomposition of (X + X')/2; each
    eigenvalue xi maps to (xi + sqrt(xi^2 + 4*alpha))/2 > 0.
    """
    if alpha <= 0:
        raise ValueError("alpha must be strictly positive")
    sym = 0.5 * (X + X.T)
    evals, V = np.linalg.eigh(sym)
    lifted = 0.5 * (evals + np.sqrt(evals ** 2 + 4.0 * alpha))
    return (V * lifted) @ V.T


def l1_row_prox(Y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Minimizer of ||X z||_1 + 0.5*||X - Y||_F^2.

    A rank-one update of Y: each row moves along z by a clipped multiple
    of its inner product with z. Returns Y unchanged when z = 0.
    """
    Y = np.asarray(Y, dtype=float)
    z = np.asarray(z, dtype=float)
    zz = float(z @ z)
    if zz == 0.0:
        return Y.copy()
    v = Y @ z
    g = np.sign(v) * np.minimum(np.abs(v) / zz, 1.0)
    return Y - np.outer(g, z)


def huber_row_prox(Y: np.ndarray, z: np.ndarray, params: HuberParams) -> np.ndarray:
    """Minimizer of alpha*sum_rows huber_kappa(x_n'z) + 0.5*||X - Y||_F^2.

    Three branches per row of Y@z: a least-squares shrink inside
    |v| <= kappa*(1 + alpha*||z||^2) and a constant +-alpha*kappa pull
    outside it.
    """
    Y = np.asarray(Y, dtype=float)
    z = np.asarray(z, dtype=float)
    kappa, alpha = params.kappa, params.alpha
    zz = float(z @ z)
    if zz == 0.0:
        return Y.copy()
    v = Y @ z
    knee = kappa * (1.0 + alpha * zz)
    h = np.where(np.abs(v) <= knee, v / (1.0 / alpha + zz),
                 alpha * kappa * np.sign(v))
    return Y - np.outer(h, z)


def huber_value(x: float, kappa: float) -> float:
    """Scalar Huber loss: quadratic inside [-kappa, kappa], linear outside."""
    if kappa <= 0:
        raise ValueError("kappa must be strictly positive")
    ax = abs(x)
    if ax <= kappa:
        return 0.5 * x * x
    return kappa * ax - 0.5 * kappa * kappa


def huber_total(X, kappa: float) -> float:
    """Sum of the scalar Huber loss over all entries of X."""
    if kappa <= 0:
        raise ValueError("kappa must be strictly positive")
    X = np.asarray(X, dtype=float)
    ax = np.abs(X)
    quad = 0.5 * X ** 2
    lin = kappa * ax - 0.5 * kappa * kappa
    return float(np.where(ax <= kappa, quad, lin).sum())
