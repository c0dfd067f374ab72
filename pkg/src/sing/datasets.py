"""Seeded sample generators for the benchmark families.

Every generator draws from an :class:`RngStream`, so a ``(seed, stream)``
pair reproduces the same data bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any

import numpy as np
from scipy.special import ndtr

from .graph import UndirectedGraph
from .numerics import cholesky, gauss_hermite

__all__ = [
    "NumericalBlowup",
    "RngStream",
    "DatasetSpec",
    "chain_precision",
    "gen_gaussian",
    "gen_butterfly",
    "gen_nonparanormal_graph",
    "cdf_transform_inverse",
    "power_transform_inverse",
    "gen_nonparanormal",
    "cubic_gaussian_precision",
    "gen_cubic",
    "gen_star_beta2",
    "lorenz96_rhs",
    "rk4_step",
    "lorenz96_trajectory",
    "generate",
    "write_samples",
    "read_samples",
]

HERMITE_ORDER = 100
MU_F0 = 0.05
SIGMA_F0 = 0.4
NONPARANORMAL_COUPLING = 0.245
BLOWUP = 1e6


class NumericalBlowup(FloatingPointError):
    pass


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(self.stream,))))

    def child(self, stream: int) -> "RngStream":
        return RngStream(self.seed, stream)


def _gen(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return np.random.default_rng(rng)


@dataclass
class DatasetSpec:
    family: str
    parameters: dict[str, Any] = field(default_factory=dict)
    truth: UndirectedGraph | None = None

    FAMILIES = ("butterfly", "nonparanormal-cdf", "nonparanormal-power", "cubic", "star-beta2", "lorenz96", "gaussian")

    def __post_init__(self):
        if self.family not in self.FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "parameters": self.parameters,
            "truth": None if self.truth is None else self.truth.to_json(),
        }


def chain_precision(d: int = 3, coupling: float = 0.2) -> np.ndarray:
    """Tridiagonal precision with unit diagonal."""
    P = np.eye(d)
    for i in range(d - 1):
        P[i, i + 1] = P[i + 1, i] = coupling
    return P


def gen_gaussian(precision, n: int, rng) -> tuple[np.ndarray, UndirectedGraph]:
    """Zero-mean Gaussian samples with the given precision, and its graph."""
    P = np.asarray(precision, dtype=float)
    low = cholesky(P)
    d = P.shape[0]
    y = _gen(rng).standard_normal((n, d))
    # x = L^-T y has covariance (L L^T)^-1
    from scipy.linalg import solve_triangular

    X = solve_triangular(low, y.T, lower=True, trans="T").T
    return X, UndirectedGraph.from_adjacency(np.abs(P) > 0)


def gen_butterfly(r: int, n: int, rng) -> tuple[np.ndarray, UndirectedGraph]:
    """Pairs ``(P_i, Q_i = W_i P_i)`` with independent standard normal ``P_i, W_i``.

    Columns are ordered ``P_1, Q_1, ..., P_r, Q_r``.
    """
    if r < 1 or n < 1:
        raise ValueError("need r >= 1 and n >= 1")
    g = _gen(rng)
    P = g.standard_normal((n, r))
    W = g.standard_normal((n, r))
    X = np.empty((n, 2 * r))
    X[:, 0::2] = P
    X[:, 1::2] = W * P
    truth = UndirectedGraph(2 * r, frozenset((2 * i + 1, 2 * i + 2) for i in range(r)))
    return X, truth


def gen_nonparanormal_graph(d: int, s: float = 3.0, max_degree: int = 4, rng=None,
                            coupling: float = NONPARANORMAL_COUPLING) -> tuple[UndirectedGraph, np.ndarray]:
    """Random geometric graph and its precision matrix.

    Each node gets a uniform point in the unit square and the pair ``(i, j)``
    is an edge with probability ``exp(-|y_i - y_j|^2 / (2 s)) / sqrt(2 pi)``,
    visited in lexicographic order and skipped if either endpoint already has
    ``max_degree`` edges.  The precision has unit diagonal and ``coupling``
    on edges.
    """
    if d < 2 or s <= 0:
        raise ValueError("need d >= 2 and s > 0")
    g = _gen(rng)
    y = g.uniform(size=(d, 2))
    u = g.uniform(size=(d, d))
    deg = np.zeros(d, dtype=int)
    edges = set()
    for i in range(d):
        for j in range(i + 1, d):
            dist2 = float(np.sum((y[i] - y[j]) ** 2))
            prob = min(1.0, math.exp(-dist2 / (2.0 * s)) / math.sqrt(2.0 * math.pi))
            if u[i, j] < prob and deg[i] < max_degree and deg[j] < max_degree:
                edges.add((i + 1, j + 1))
                deg[i] += 1
                deg[j] += 1
    P = np.eye(d)
    for i, j in edges:
        P[i - 1, j - 1] = P[j - 1, i - 1] = coupling
    return UndirectedGraph(d, frozenset(edges)), P


def _f0_cdf(t):
    return ndtr((np.asarray(t, dtype=float) - MU_F0) / SIGMA_F0)


@lru_cache(maxsize=None)
def _cdf_moments(k: int, sigma: float, mu: float) -> tuple[float, float]:
    rule = gauss_hermite(HERMITE_ORDER)
    vals = _f0_cdf(mu + sigma * rule.nodes)
    m = float(rule.weights @ vals)
    s = math.sqrt(float(rule.weights @ (vals - m) ** 2))
    return m, s


def cdf_transform_inverse(x, k: int, sigma_kk: float, mu: float = 0.0):
    """Scaled Gaussian-CDF marginal transform.

    ``f0 = Phi((t - 0.05) / 0.4)`` is centered and scaled by its mean and
    standard deviation under ``N(mu, sigma_kk)``, so the output has that same
    mean and variance when the input does.  The two normalizing integrals are
    cached per variable index ``k``.
    """
    sigma = math.sqrt(sigma_kk)
    m, s = _cdf_moments(int(k), sigma, float(mu))
    return sigma * (_f0_cdf(x) - m) / s + mu


@lru_cache(maxsize=None)
def _power_scale(k: int, sigma: float, a: float) -> float:
    rule = gauss_hermite(HERMITE_ORDER)
    t = sigma * rule.nodes
    return math.sqrt(float(rule.weights @ np.abs(t) ** (2.0 * a)))


def power_transform_inverse(x, k: int, a: float, sigma_kk: float, mu: float = 0.0):
    """``sigma * sign(x - mu) |x - mu|^a / scale + mu`` with unit-variance scaling."""
    if a <= 0:
        raise ValueError("a must be positive")
    sigma = math.sqrt(sigma_kk)
    t = np.asarray(x, dtype=float) - mu
    return sigma * np.sign(t) * np.abs(t) ** a / _power_scale(int(k), sigma, float(a)) + mu


def gen_nonparanormal(graph: UndirectedGraph, precision, n: int, rng, transform: str = "cdf",
                      a: float = 3.0) -> np.ndarray:
    """Gaussian samples pushed through a per-variable monotone transform."""
    X, _ = gen_gaussian(precision, n, rng)
    cov = np.linalg.inv(np.asarray(precision, dtype=float))
    Z = np.empty_like(X)
    for k in range(X.shape[1]):
        if transform == "cdf":
            Z[:, k] = cdf_transform_inverse(X[:, k], k, cov[k, k])
        elif transform == "power":
            Z[:, k] = power_transform_inverse(X[:, k], k, a, cov[k, k])
        else:
            raise ValueError(f"unknown transform {transform!r}")
    return Z


def cubic_gaussian_precision(precision=None) -> np.ndarray:
    """Precision of the Gaussian approximation to ``x**3``, ``x ~ N(0, Sigma)``.

    Uses ``E[x_i^3 x_j^3] = 9 s_ii s_jj s_ij + 6 s_ij^3``.
    """
    P = chain_precision(3) if precision is None else np.asarray(precision, dtype=float)
    s = np.linalg.inv(P)
    dg = np.diag(s)
    cov = 9.0 * np.outer(dg, dg) * s + 6.0 * s ** 3
    return np.linalg.inv(cov)


def gen_cubic(n: int, rng, precision=None) -> tuple[np.ndarray, UndirectedGraph, np.ndarray]:
    P = chain_precision(3) if precision is None else np.asarray(precision, dtype=float)
    X, truth = gen_gaussian(P, n, rng)
    return X ** 3, truth, cubic_gaussian_precision(P)


def star_moments(a: float = 1.0, b: float = 1.0) -> tuple[float, float, float, float]:
    """Mean/variance of the hub and of each leaf of the star base density."""
    # x1 = y1 / a ; xk = (yk - x1^2 - b) / a
    m_leaf = -(1.0 / a ** 2 + b) / a
    v_leaf = (1.0 + 2.0 / a ** 4) / a ** 2
    return 0.0, 1.0 / a ** 2, m_leaf, v_leaf


def gen_star_beta2(d: int, n: int, rng, a: float = 1.0, b: float = 1.0,
                   transform: bool = True) -> tuple[np.ndarray, UndirectedGraph]:
    """Star-graph target from a sparse degree-2 base map plus a marginal transform.

    The base map is ``S^1 = a x_1``, ``S^k = x_1^2 + b + a x_k``; samples are
    ``S^-1(y)`` for standard normal ``y``.  With ``transform`` each variable is
    then passed through :func:`cdf_transform_inverse` with ``mu = 0`` and its
    own exact variance.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    y = _gen(rng).standard_normal((n, d))
    X = np.empty_like(y)
    X[:, 0] = y[:, 0] / a
    X[:, 1:] = (y[:, 1:] - X[:, :1] ** 2 - b) / a
    truth = UndirectedGraph(d, frozenset((1, k) for k in range(2, d + 1)))
    if not transform:
        return X, truth
    _, v1, _, vk = star_moments(a, b)
    Z = np.empty_like(X)
    Z[:, 0] = cdf_transform_inverse(X[:, 0], 0, v1)
    for k in range(1, d):
        Z[:, k] = cdf_transform_inverse(X[:, k], k, vk)
    return Z, truth


def lorenz96_rhs(z, F: float = 8.0, printed_sign: bool = False) -> np.ndarray:
    """``dz_j/dt = (z_{j+1} - z_{j-2}) z_{j-1} - z_j + F`` with periodic indices.

    ``printed_sign=True`` uses ``+ z_{j-2}`` instead.
    """
    z = np.asarray(z, dtype=float)
    if z.shape[-1] < 4:
        raise ValueError("Lorenz-96 needs d >= 4")
    zp1 = np.roll(z, -1, axis=-1)
    zm1 = np.roll(z, 1, axis=-1)
    zm2 = np.roll(z, 2, axis=-1)
    adv = zp1 + zm2 if printed_sign else zp1 - zm2
    return adv * zm1 - z + F


def rk4_step(f, z, dt: float):
    k1 = f(z)
    k2 = f(z + 0.5 * dt * k1)
    k3 = f(z + 0.5 * dt * k2)
    k4 = f(z + dt * k3)
    return z + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def lorenz96_trajectory(d: int = 15, F: float = 8.0, dt: float = 0.01, t_end: float = 1600.0,
                        subsample: int = 40, burn_in: int = 1000, rng=None,
                        printed_sign: bool = False) -> np.ndarray:
    """RK4 trajectory from ``z(0) ~ N(0, I)`` keeping every ``subsample``-th step.

    Steps ``k = 0, subsample, 2*subsample, ...`` below ``t_end / dt`` are kept and
    the first ``burn_in`` of them discarded; the defaults give 3000 rows.
    """
    steps = int(round(t_end / dt))
    z = _gen(rng).standard_normal(d)
    kept = []
    rhs = lambda x: lorenz96_rhs(x, F, printed_sign)  # noqa: E731
    for k in range(steps):
        if k % subsample == 0:
            kept.append(z.copy())
        z = rk4_step(rhs, z, dt)
        if not np.all(np.abs(z) < BLOWUP):
            raise NumericalBlowup(f"state exceeded {BLOWUP:g} at step {k + 1}")
    return np.array(kept[burn_in:])


def generate(family: str, n: int, seed: int = 0, stream: int = 1, **params) -> tuple[np.ndarray, UndirectedGraph, DatasetSpec]:
    """Draw one dataset of a named family.

    Structure that should stay fixed across repeated trials (the random
    nonparanormal graph) comes from stream 0 of ``seed``; samples come from
    ``stream``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    data_rng = RngStream(seed, stream)
    extra: dict[str, Any] = {}
    if family == "butterfly":
        r = int(params.get("pairs", 5))
        X, truth = gen_butterfly(r, n, data_rng)
        extra["pairs"] = r
    elif family in ("nonparanormal-cdf", "nonparanormal-power"):
        d = int(params.get("d", 10))
        s = float(params.get("s", 3.0))
        graph, P = gen_nonparanormal_graph(d, s, int(params.get("max_degree", 4)), RngStream(seed, 0))
        X = gen_nonparanormal(graph, P, n, data_rng, family.split("-")[1], float(params.get("a", 3.0)))
        truth = graph
        extra.update(d=d, s=s)
    elif family == "cubic":
        X, truth, _ = gen_cubic(n, data_rng)
    elif family == "star-beta2":
        d = int(params.get("d", 5))
        X, truth = gen_star_beta2(d, n, data_rng)
        extra["d"] = d
    elif family == "lorenz96":
        d = int(params.get("d", 15))
        printed = bool(params.get("printed_sign", False))
        X = lorenz96_trajectory(d=d, F=float(params.get("F", 8.0)), rng=data_rng, printed_sign=printed)
        if n < len(X):
            X = X[:n]
        truth = None
        extra.update(d=d, printed_sign=printed)
    elif family == "gaussian":
        d = int(params.get("d", 3))
        coupling = float(params.get("coupling", 0.2))
        P = chain_precision(d, coupling) if params.get("chain", True) else np.eye(d)
        X, truth = gen_gaussian(P, n, data_rng)
        extra.update(d=d, chain=bool(params.get("chain", True)), coupling=coupling)
    else:
        raise ValueError(f"unknown family {family!r}")
    spec = DatasetSpec(family, {"n": len(X), "seed": seed, "stream": stream, **extra}, truth)
    return X, truth, spec


def write_samples(path, X) -> None:
    """Headerless comma-separated doubles at full precision."""
    np.savetxt(path, np.asarray(X, dtype=float), delimiter=",", fmt="%.17g")


def read_samples(path) -> np.ndarray:
    X = np.loadtxt(path, delimiter=",", ndmin=2)
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{path}: non-finite entries")
    return X
