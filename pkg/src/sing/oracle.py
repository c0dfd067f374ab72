"""Reference quantities used to check the estimators: closed-form Gaussian
scores, Gaussian log-Sobolev constants and a nested Monte Carlo estimate of
conditional mutual information."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .numerics import cholesky
from .score import ScoreMatrix

__all__ = [
    "CmiEstimate",
    "GaussianDensity",
    "gaussian_score",
    "gaussian_log_sobolev_constant",
    "nested_mc_cmi",
    "check_theorem1_bound",
]


@dataclass(frozen=True)
class CmiEstimate:
    value: float
    outer_n: int
    inner_n: int
    std_error: float

    def __post_init__(self):
        if self.outer_n < 1 or self.inner_n < 1 or self.std_error < 0:
            raise ValueError("invalid CMI estimate")

    def to_json(self) -> dict:
        return {"estimate": self.value, "std_error": self.std_error,
                "outer_n": self.outer_n, "inner_n": self.inner_n, "units": "nats"}


class GaussianDensity:
    """Zero-mean (or ``mean``) Gaussian with an exact sampler and an unnormalized log density."""

    def __init__(self, covariance, mean=None):
        self.cov = np.asarray(covariance, dtype=float)
        self.dim = self.cov.shape[0]
        self.mean = np.zeros(self.dim) if mean is None else np.asarray(mean, dtype=float)
        self._low = cholesky(self.cov)
        self.precision = np.linalg.inv(self.cov)

    def log_density(self, z) -> np.ndarray:
        x = np.asarray(z, dtype=float) - self.mean
        return -0.5 * np.einsum("...i,ij,...j->...", x, self.precision, x)

    def sample(self, n: int, rng) -> np.ndarray:
        return self.mean + rng.standard_normal((n, self.dim)) @ self._low.T


def gaussian_score(precision) -> ScoreMatrix:
    """Squared off-diagonal precision entries, which is the exact score of a Gaussian."""
    P = np.asarray(precision, dtype=float)
    if not np.allclose(P, P.T, atol=1e-12):
        raise ValueError("precision must be symmetric")
    omega = P ** 2
    np.fill_diagonal(omega, 0.0)
    return ScoreMatrix(omega, n=0)


def gaussian_log_sobolev_constant(covariance, tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """Largest covariance eigenvalue by power iteration."""
    C = np.asarray(covariance, dtype=float)
    cholesky(C)
    v = np.ones(C.shape[0]) / math.sqrt(C.shape[0])
    lam = 0.0
    for _ in range(max_iter):
        w = C @ v
        lam_new = float(v @ w)
        v = w / np.linalg.norm(w)
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return lam_new
        lam = lam_new
    return lam


def _generator(rng, stream: int) -> np.random.Generator:
    from .datasets import RngStream

    if isinstance(rng, RngStream):
        return rng.child(rng.stream * 1000 + stream).generator()
    return np.random.default_rng([int(rng), stream])


class _Proposal:
    """Linear-Gaussian guess for ``z_A | z_R`` fitted on pilot samples, variance doubled."""

    def __init__(self, pilot: np.ndarray, A: list[int], R: list[int]):
        self.A, self.R = A, R
        X = np.column_stack([np.ones(len(pilot)), pilot[:, R]])
        Y = pilot[:, A]
        coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
        resid = Y - X @ coef
        cov = 2.0 * (resid.T @ resid) / len(pilot)
        self.coef = coef
        self.low = cholesky(cov)
        self.prec = np.linalg.inv(cov)
        self.log_norm = -0.5 * len(A) * math.log(2 * math.pi) - float(np.sum(np.log(np.diag(self.low))))

    def log_integral(self, density, Z: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
        """IS estimate of ``log int pi(y_A, z_R) dy_A`` for each row of ``Z``."""
        B, a = len(Z), len(self.A)
        mean = np.column_stack([np.ones(B), Z[:, self.R]]) @ self.coef
        eps = rng.standard_normal((B, m, a))
        dev = eps @ self.low.T
        pts = np.repeat(Z[:, None, :], m, axis=1)
        pts[:, :, self.A] = mean[:, None, :] + dev
        log_q = self.log_norm - 0.5 * np.einsum("bmi,ij,bmj->bm", dev, self.prec, dev)
        return logsumexp(density.log_density(pts) - log_q, axis=1) - math.log(m)


def nested_mc_cmi(density, i: int, j: int, outer_n: int = 10_000, inner_n: int = 1000, rng=0,
                  pilot_n: int = 20_000, chunk: int = 250) -> CmiEstimate:
    """Nested Monte Carlo estimate of ``I(Z_i; Z_j | rest)`` in nats.

    ``density`` needs ``sample(n, generator)``, ``log_density(points)`` (up to a
    constant) and ``dim``.  For each outer sample the log ratio
    ``log pi(z) + log pi(z_-ij) - log pi(z_i, z_-ij) - log pi(z_j, z_-ij)`` is
    formed, with the three marginals obtained by importance sampling over the
    missing coordinates.  ``i`` and ``j`` are 0-based.
    """
    d = density.dim
    if i == j or not (0 <= i < d and 0 <= j < d):
        raise ValueError("need distinct indices inside the dimension")
    if outer_n < 1 or inner_n < 1:
        raise ValueError("outer_n and inner_n must be >= 1")
    pilot = density.sample(pilot_n, _generator(rng, 0))
    rest = [k for k in range(d) if k not in (i, j)]
    over_j = _Proposal(pilot, [j], [k for k in range(d) if k != j])
    over_i = _Proposal(pilot, [i], [k for k in range(d) if k != i])
    over_ij = _Proposal(pilot, [i, j], rest)
    Z = density.sample(outer_n, _generator(rng, 1))
    inner = _generator(rng, 2)
    terms = np.empty(outer_n)
    for s in range(0, outer_n, chunk):
        zc = Z[s:s + chunk]
        terms[s:s + chunk] = (density.log_density(zc)
                              + over_ij.log_integral(density, zc, inner_n, inner)
                              - over_j.log_integral(density, zc, inner_n, inner)
                              - over_i.log_integral(density, zc, inner_n, inner))
    se = float(terms.std(ddof=1) / math.sqrt(outer_n)) if outer_n > 1 else 0.0
    return CmiEstimate(float(terms.mean()), outer_n, inner_n, se)


def check_theorem1_bound(rho: float) -> tuple[float, float, bool]:
    """Exact CMI of a unit-variance 2-d Gaussian and its log-Sobolev score bound."""
    if not abs(rho) < 1:
        raise ValueError("|rho| must be < 1")
    cmi = -0.5 * math.log1p(-rho * rho)
    c0 = gaussian_log_sobolev_constant(np.array([[1.0, rho], [rho, 1.0]]))
    bound = c0 ** 2 * (rho / (1.0 - rho * rho)) ** 2
    return cmi, bound, cmi <= bound
