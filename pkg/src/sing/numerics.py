"""Dense linear algebra, quadrature rules and finite differences."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import linalg as sla

__all__ = [
    "NotPositiveDefinite",
    "QuadratureRule",
    "cholesky",
    "solve_spd",
    "gauss_legendre",
    "gauss_hermite",
    "finite_difference_gradient",
]

SYMMETRY_TOL = 1e-10
PIVOT_TOL = 1e-12


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Raised when a Cholesky pivot falls below the relative tolerance."""


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    kind: str

    def __post_init__(self):
        if self.nodes.shape != self.weights.shape:
            raise ValueError("nodes and weights must have equal length")

    def __len__(self) -> int:
        return len(self.nodes)


def _check_symmetric(a: np.ndarray) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > SYMMETRY_TOL * scale:
        raise ValueError("matrix is not symmetric")


def cholesky(a) -> np.ndarray:
    """Lower-triangular factor ``L`` with ``L @ L.T == a``.

    A pivot smaller than ``1e-12 * max(diag(a))`` counts as a failure, so
    rank-deficient empirical covariances (``n < d``) are reported instead of
    silently producing a huge inverse.
    """
    a = np.asarray(a, dtype=float)
    _check_symmetric(a)
    diag_max = float(np.max(np.diag(a)))
    if not diag_max > 0.0:
        raise NotPositiveDefinite("non-positive diagonal")
    try:
        low = sla.cholesky(a, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    pivots = np.diag(low) ** 2
    if np.min(pivots) <= PIVOT_TOL * diag_max:
        raise NotPositiveDefinite(
            f"pivot {np.min(pivots):.3e} below tolerance {PIVOT_TOL * diag_max:.3e}"
        )
    return low


def solve_spd(a, b) -> np.ndarray:
    """Solve ``a x = b`` for symmetric positive-definite ``a``.

    ``b`` may be a vector or a matrix of right-hand sides (one per column).
    """
    low = cholesky(a)
    return sla.cho_solve((low, True), np.asarray(b, dtype=float), check_finite=False)


def _legendre_and_derivative(order: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p_prev = np.ones_like(x)
    p = x.copy()
    for j in range(1, order):
        p_prev, p = p, ((2 * j + 1) * x * p - j * p_prev) / (j + 1)
    dp = order * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def gauss_legendre(order: int, tol: float = 1e-14) -> QuadratureRule:
    """Gauss-Legendre rule on ``[-1, 1]`` exact for degree ``2*order - 1``.

    Nodes are found by Newton iteration on the Legendre polynomial starting
    from the Chebyshev-like guesses ``cos(pi (i - 1/4) / (order + 1/2))``.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if order == 1:
        return QuadratureRule(np.array([0.0]), np.array([2.0]), "gauss-legendre")
    i = np.arange(1, order + 1)
    x = np.cos(np.pi * (i - 0.25) / (order + 0.5))
    for _ in range(100):
        p, dp = _legendre_and_derivative(order, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < tol:
            break
    _, dp = _legendre_and_derivative(order, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    idx = np.argsort(x)
    return QuadratureRule(x[idx], w[idx], "gauss-legendre")


def gauss_hermite(order: int) -> QuadratureRule:
    """Probabilists' Gauss-Hermite rule: ``E[f(X)], X ~ N(0,1)`` is ``sum(w f(x))``.

    Weights are normalized to sum to one.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    x, w = np.polynomial.hermite_e.hermegauss(order)
    w = w / math.sqrt(2.0 * math.pi)
    return QuadratureRule(x, w, "gauss-hermite")


def finite_difference_gradient(f: Callable[[np.ndarray], float], x, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient ``(f(x + h e_i) - f(x - h e_i)) / 2h``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        grad[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return grad
