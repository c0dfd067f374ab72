"""Monotone lower-triangular transport maps and their derivatives.

Component ``k`` has the integrated-squared form::

    S^k(z) = c_k(z_<k) + int_0^{z_k} g(h_k(z_<k, t)) dt,    g(x) = x^2 + eps,

with ``c_k`` and ``h_k`` expanded in :mod:`sing.basis`.  The integral is
discretized with Gauss-Legendre on ``[0, z_k]``; coefficient derivatives
differentiate the discretized integral, while ``d S^k / d z_k`` is taken as
``g(h_k(z))`` exactly.  Variable indices in this module are 0-based.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from ._parallel import pmap
from .basis import BasisEvaluator, BasisSet, total_degree_set
from .numerics import gauss_legendre

__all__ = [
    "DEFAULT_EPS",
    "DEFAULT_QUAD_ORDER",
    "NoConvergence",
    "SparsityPattern",
    "MapComponent",
    "TriangularMap",
    "ComponentEngine",
    "make_component",
    "build_map",
    "eval_component",
    "partial_k",
    "evaluate",
    "log_pullback",
    "mixed_log_hessian",
    "coeff_gradient_log_pullback",
    "invert",
    "map_to_json",
    "map_from_json",
]

DEFAULT_EPS = 1e-8
DEFAULT_QUAD_ORDER = 32
LOG_2PI = math.log(2.0 * math.pi)


class NoConvergence(RuntimeError):
    pass


@dataclass(frozen=True)
class SparsityPattern:
    """Pairs ``(j, k)``, 1-based with ``j < k``, such that component ``k`` ignores ``z_j``."""

    pairs: frozenset = frozenset()

    def __post_init__(self):
        pairs = frozenset((int(j), int(k)) for j, k in self.pairs)
        for j, k in pairs:
            if not 1 <= j < k:
                raise ValueError(f"invalid sparsity pair {(j, k)}")
        object.__setattr__(self, "pairs", pairs)

    def active_inputs(self, k: int) -> list[int]:
        """0-based variables ``j < k`` that component ``k`` (0-based) may use."""
        return [j for j in range(k) if (j + 1, k + 1) not in self.pairs]

    def __len__(self) -> int:
        return len(self.pairs)

    def __contains__(self, pair) -> bool:
        return tuple(pair) in self.pairs


@dataclass
class MapComponent:
    index: int
    c_basis: BasisSet
    h_basis: BasisSet
    c_coeffs: np.ndarray
    h_coeffs: np.ndarray

    def __post_init__(self):
        self.c_coeffs = np.asarray(self.c_coeffs, dtype=float).copy()
        self.h_coeffs = np.asarray(self.h_coeffs, dtype=float).copy()
        if len(self.c_coeffs) != len(self.c_basis) or len(self.h_coeffs) != len(self.h_basis):
            raise ValueError("coefficient lengths must match basis cardinalities")
        if any(v >= self.index for v in self.c_basis.active_variables):
            raise ValueError("c basis may only use variables before the component index")
        if any(v > self.index for v in self.h_basis.active_variables):
            raise ValueError("h basis may only use variables up to the component index")

    @property
    def n_coeffs(self) -> int:
        return len(self.c_coeffs) + len(self.h_coeffs)

    @property
    def coeffs(self) -> np.ndarray:
        return np.concatenate([self.c_coeffs, self.h_coeffs])

    def with_coeffs(self, theta) -> "MapComponent":
        theta = np.asarray(theta, dtype=float)
        nc = len(self.c_coeffs)
        return replace(self, c_coeffs=theta[:nc], h_coeffs=theta[nc:])

    @property
    def inputs(self) -> tuple[int, ...]:
        """All variables the component depends on, including its own index."""
        return tuple(sorted(set(self.c_basis.active_variables) | set(self.h_basis.active_variables) | {self.index}))


@dataclass
class TriangularMap:
    components: list[MapComponent]
    sparsity: SparsityPattern = field(default_factory=SparsityPattern)
    quadrature_order: int = DEFAULT_QUAD_ORDER
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        for k, comp in enumerate(self.components):
            if comp.index != k:
                raise ValueError("components must be listed in index order")
            for j in comp.inputs:
                if j < k and (j + 1, k + 1) in self.sparsity:
                    raise ValueError(f"component {k + 1} uses variable {j + 1} excluded by the sparsity pattern")

    @property
    def dim(self) -> int:
        return len(self.components)

    @property
    def n_coeffs(self) -> int:
        return sum(c.n_coeffs for c in self.components)

    @property
    def coeffs(self) -> np.ndarray:
        return np.concatenate([c.coeffs for c in self.components])

    def coeff_slices(self) -> list[slice]:
        out, start = [], 0
        for c in self.components:
            out.append(slice(start, start + c.n_coeffs))
            start += c.n_coeffs
        return out

    def with_coeffs(self, theta) -> "TriangularMap":
        theta = np.asarray(theta, dtype=float)
        comps = [c.with_coeffs(theta[s]) for c, s in zip(self.components, self.coeff_slices())]
        return replace(self, components=comps)

    def with_component(self, comp: MapComponent) -> "TriangularMap":
        comps = list(self.components)
        comps[comp.index] = comp
        return replace(self, components=comps)


def make_component(k: int, active: Iterable[int], degree: int) -> MapComponent:
    """Component ``k`` of total degree ``degree`` using inputs ``active`` (all < k).

    Coefficients start at the identity-like map ``S^k(z) ~ z_k``.
    """
    active = sorted(set(int(j) for j in active))
    if degree < 1:
        raise ValueError("degree must be >= 1")
    c_basis = total_degree_set(active, degree)
    h_basis = total_degree_set(active + [k], degree - 1)
    h = np.zeros(len(h_basis))
    h[0] = 1.0
    return MapComponent(k, c_basis, h_basis, np.zeros(len(c_basis)), h)


def build_map(d: int, degree: int, pattern: SparsityPattern | None = None,
              quadrature_order: int = DEFAULT_QUAD_ORDER, eps: float = DEFAULT_EPS) -> TriangularMap:
    pattern = pattern or SparsityPattern()
    comps = [make_component(k, pattern.active_inputs(k), degree) for k in range(d)]
    return TriangularMap(comps, pattern, quadrature_order, eps)


def _unit_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    rule = gauss_legendre(order)
    return 0.5 * (rule.nodes + 1.0), 0.5 * rule.weights


class _Acc:
    """Accumulates weight vectors per derivative pattern before one transposed product."""

    def __init__(self):
        self.terms: dict[tuple, np.ndarray] = {}

    def add(self, pattern: tuple, w: np.ndarray) -> None:
        pattern = tuple(sorted(pattern))
        if pattern in self.terms:
            self.terms[pattern] = self.terms[pattern] + w
        else:
            self.terms[pattern] = w

    def apply(self, ev: BasisEvaluator) -> np.ndarray:
        out = np.zeros(len(ev.basis))
        for pattern, w in self.terms.items():
            out += ev.tdot(w.ravel(), pattern)
        return out


def _d(*vars_) -> tuple:
    return tuple((v, 1) for v in vars_)


class ComponentEngine:
    """Vectorized evaluation of one component, and its derivatives, on a fixed sample.

    Basis values at the sample and at the quadrature nodes are computed once;
    :meth:`set_coeffs` then only costs matrix-vector products, which makes the
    engine the workhorse of fitting, scoring and Fisher information.
    """

    def __init__(self, comp: MapComponent, Z: np.ndarray, quadrature_order: int = DEFAULT_QUAD_ORDER,
                 eps: float = DEFAULT_EPS):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        self.k = k = comp.index
        self.comp = comp
        self.eps = eps
        self.n = n = Z.shape[0]
        self.zk = Z[:, k].copy()
        self.psi = BasisEvaluator(comp.c_basis, {v: Z[:, v] for v in comp.c_basis.active_variables}, n)
        self.phi = BasisEvaluator(comp.h_basis, {v: Z[:, v] for v in comp.h_basis.active_variables}, n)
        self.h_uses_zk = bool(comp.h_basis.degrees_of(k).any())
        if self.h_uses_zk:
            t, w = _unit_rule(quadrature_order)
            cols = {v: np.repeat(Z[:, v], len(t)) for v in comp.h_basis.active_variables if v != k}
            cols[k] = (self.zk[:, None] * t[None, :]).ravel()
            self.phiq = BasisEvaluator(comp.h_basis, cols, n * len(t))
            self.w = w
        else:
            # integrand is constant in t: the "quadrature" is exact with one node
            self.phiq = self.phi
            self.w = np.ones(1)
        self.Q = len(self.w)
        self.nc = len(comp.c_basis)
        self.nh = len(comp.h_basis)
        self.set_coeffs(comp.coeffs)

    # -- forward quantities -------------------------------------------------

    def set_coeffs(self, theta) -> None:
        theta = np.asarray(theta, dtype=float)
        self.cc = theta[: self.nc]
        self.hc = theta[self.nc:]
        self.h = self.phi.dot(self.hc)
        self.g = self.h * self.h + self.eps
        self.hq = self.phiq.dot(self.hc).reshape(self.n, self.Q)
        self.integral = self.zk * ((self.hq * self.hq + self.eps) @ self.w)
        self.S = self.psi.dot(self.cc) + self.integral
        self._hq_i: dict[int, np.ndarray] = {}
        self._S_i: dict[int, np.ndarray] = {}

    def hq_i(self, i: int) -> np.ndarray:
        if i not in self._hq_i:
            self._hq_i[i] = self.phiq.dot(self.hc, _d(i)).reshape(self.n, self.Q)
        return self._hq_i[i]

    def S_i(self, i: int) -> np.ndarray:
        """First input derivative of the component (``i`` may equal ``k``)."""
        if i == self.k:
            return self.g
        if i not in self._S_i:
            self._S_i[i] = self.psi.dot(self.cc, _d(i)) + self.zk * ((2.0 * self.hq * self.hq_i(i)) @ self.w)
        return self._S_i[i]

    def S_ij(self, i: int, j: int) -> np.ndarray:
        i, j = min(i, j), max(i, j)
        if j == self.k:
            return 2.0 * self.h * self.phi.dot(self.hc, _d(i))
        hq_ij = self.phiq.dot(self.hc, _d(i, j)).reshape(self.n, self.Q)
        quad = 2.0 * (self.hq_i(i) * self.hq_i(j) + self.hq * hq_ij)
        return self.psi.dot(self.cc, _d(i, j)) + self.zk * (quad @ self.w)

    # -- log-likelihood -----------------------------------------------------

    def log_terms(self) -> np.ndarray:
        """Per-sample ``-S^2/2 + log dS/dz_k`` (no normalizing constant)."""
        return -0.5 * self.S * self.S + np.log(self.g)

    def objective(self) -> float:
        """Average negative log-likelihood contribution, without ``log(2 pi)/2``."""
        return float(np.mean(0.5 * self.S * self.S - np.log(self.g)))

    def _quad_weights(self, a: np.ndarray) -> np.ndarray:
        # sum_l a_l * (quadrature of f) == sum_{l,q} (a_l z_k w_q) f_lq
        return (a * self.zk)[:, None] * self.w[None, :]

    def sample_gradients(self, weights: np.ndarray) -> np.ndarray:
        """``sum_l weights_l * d/dtheta log_terms_l``."""
        gc = -self.psi.tdot(weights * self.S)
        acc = _Acc()
        acc.add((), -2.0 * self.hq * self._quad_weights(weights * self.S))
        gh = acc.apply(self.phiq) + self.phi.tdot(weights * 2.0 * self.h / self.g)
        return np.concatenate([gc, gh])

    def gradient(self) -> np.ndarray:
        """Gradient of :meth:`objective`."""
        return -self.sample_gradients(np.full(self.n, 1.0 / self.n))

    def per_sample_gradient(self) -> np.ndarray:
        """``(n, p)`` matrix of coefficient gradients of the per-sample log terms."""
        psi = self.psi.full()
        phi = self.phi.full()
        dS_dh = self._dS_dh()
        gc = -self.S[:, None] * psi
        gh = -self.S[:, None] * dS_dh + (2.0 * self.h / self.g)[:, None] * phi
        return np.hstack([gc, gh])

    def _dS_dh(self) -> np.ndarray:
        phiq = self.phiq.full().reshape(self.n, self.Q, self.nh)
        wq = 2.0 * self.hq * self.w[None, :]
        return self.zk[:, None] * np.einsum("lq,lqa->la", wq, phiq)

    def hessian(self) -> np.ndarray:
        """Hessian of :meth:`objective` with respect to ``(c, h)`` coefficients."""
        n = self.n
        psi = self.psi.full()
        phi = self.phi.full()
        D = self._dS_dh()
        hcc = psi.T @ psi / n
        hch = psi.T @ D / n
        qw = (2.0 * self.S * self.zk)[:, None] * self.w[None, :]
        phiq = self.phiq.full()
        hhh = D.T @ D / n + (phiq * qw.reshape(-1, 1)).T @ phiq / n
        curv = 2.0 / self.g - 4.0 * self.h ** 2 / self.g ** 2
        hhh -= (phi * curv[:, None]).T @ phi / n
        top = np.hstack([hcc, hch])
        bottom = np.hstack([hch.T, hhh])
        H = np.vstack([top, bottom])
        return 0.5 * (H + H.T)

    # -- mixed second derivatives of the log terms ----------------------------

    def _pair_parts(self, i: int, j: int):
        i, j = min(i, j), max(i, j)
        Si, Sj = self.S_i(i), self.S_i(j)
        Sij = self.S_ij(i, j)
        hi = self.phi.dot(self.hc, _d(i))
        hj = self.phi.dot(self.hc, _d(j))
        hij = self.phi.dot(self.hc, _d(i, j))
        return Si, Sj, Sij, hi, hj, hij

    def pair_hessian(self, i: int, j: int) -> np.ndarray:
        """``d_i d_j`` of the per-sample log terms, for ``i != j``."""
        if i == j:
            raise ValueError("pair_hessian needs i != j")
        Si, Sj, Sij, hi, hj, hij = self._pair_parts(i, j)
        h, g = self.h, self.g
        lg = 2.0 * (hi * hj + h * hij) / g - 4.0 * h * h * hi * hj / (g * g)
        return -Si * Sj - self.S * Sij + lg

    def pair_hessian_grad(self, i: int, j: int, u: np.ndarray) -> np.ndarray:
        """``sum_l u_l * d/dtheta pair_hessian(i, j)_l`` over coefficients ``(c, h)``."""
        i, j = min(i, j), max(i, j)
        k = self.k
        Si, Sj, Sij, hi, hj, hij = self._pair_parts(i, j)
        h, g, S = self.h, self.g, self.S

        accq, acch = _Acc(), _Acc()
        gc = np.zeros(self.nc)

        def add_dS(a):
            nonlocal gc
            gc = gc + self.psi.tdot(a)
            accq.add((), 2.0 * self.hq * self._quad_weights(a))

        def add_dSi(var, a):
            nonlocal gc
            if var == k:
                acch.add((), 2.0 * h * a)
                return
            gc = gc + self.psi.tdot(a, _d(var))
            A = self._quad_weights(a)
            accq.add((), 2.0 * self.hq_i(var) * A)
            accq.add(_d(var), 2.0 * self.hq * A)

        def add_dSij(a):
            nonlocal gc
            if j == k:
                acch.add((), 2.0 * hi * a)
                acch.add(_d(i), 2.0 * h * a)
                return
            gc = gc + self.psi.tdot(a, _d(i, j))
            A = self._quad_weights(a)
            hq_ij = self.phiq.dot(self.hc, _d(i, j)).reshape(self.n, self.Q)
            accq.add(_d(i), 2.0 * self.hq_i(j) * A)
            accq.add(_d(j), 2.0 * self.hq_i(i) * A)
            accq.add((), 2.0 * hq_ij * A)
            accq.add(_d(i, j), 2.0 * self.hq * A)

        add_dS(-u * Sij)
        add_dSij(-u * S)
        add_dSi(i, -u * Sj)
        add_dSi(j, -u * Si)

        g2, g3 = g * g, g * g * g
        d_h = (2.0 * hij / g - 4.0 * h * (hi * hj + h * hij) / g2
               - 8.0 * h * hi * hj / g2 + 16.0 * h ** 3 * hi * hj / g3)
        d_hi = 2.0 * hj / g - 4.0 * h * h * hj / g2
        d_hj = 2.0 * hi / g - 4.0 * h * h * hi / g2
        d_hij = 2.0 * h / g
        acch.add((), u * d_h)
        acch.add(_d(i), u * d_hi)
        acch.add(_d(j), u * d_hj)
        acch.add(_d(i, j), u * d_hij)

        gh = acch.apply(self.phi)
        if accq.terms:
            gh = gh + accq.apply(self.phiq)
        return np.concatenate([gc, gh])


def _engines(tmap: TriangularMap, Z: np.ndarray, comps=None) -> list[ComponentEngine]:
    comps = tmap.components if comps is None else comps
    return pmap(lambda c: ComponentEngine(c, Z, tmap.quadrature_order, tmap.eps), comps)


def _as_points(z) -> tuple[np.ndarray, bool]:
    z = np.asarray(z, dtype=float)
    return np.atleast_2d(z), z.ndim == 1


def eval_component(comp: MapComponent, z, quadrature_order: int = DEFAULT_QUAD_ORDER,
                   eps: float = DEFAULT_EPS):
    """``S^k(z)`` for one point or a 2-d array of points."""
    Z, single = _as_points(z)
    S = ComponentEngine(comp, Z, quadrature_order, eps).S
    return float(S[0]) if single else S


def partial_k(comp: MapComponent, z, eps: float = DEFAULT_EPS):
    """``d S^k / d z_k = h_k(z)^2 + eps``; strictly positive."""
    Z, single = _as_points(z)
    ev = BasisEvaluator(comp.h_basis, {v: Z[:, v] for v in comp.h_basis.active_variables}, len(Z))
    h = ev.dot(comp.h_coeffs)
    g = h * h + eps
    return float(g[0]) if single else g


def evaluate(tmap: TriangularMap, z) -> np.ndarray:
    """Map evaluation ``S(z)``."""
    Z, single = _as_points(z)
    out = np.column_stack([e.S for e in _engines(tmap, Z)])
    return out[0] if single else out


def log_pullback(tmap: TriangularMap, z):
    """Log-density of the pullback of the standard Gaussian through ``tmap``."""
    Z, single = _as_points(z)
    total = sum(e.log_terms() for e in _engines(tmap, Z)) - 0.5 * tmap.dim * LOG_2PI
    return float(total[0]) if single else total


def mixed_log_hessian(tmap: TriangularMap, z, i: int, j: int):
    """``d_i d_j log pullback(z)`` for 0-based ``i != j``."""
    if i == j:
        raise ValueError("i and j must differ")
    Z, single = _as_points(z)
    i, j = min(i, j), max(i, j)
    comps = [c for c in tmap.components[j:] if i in c.inputs and j in c.inputs]
    total = np.zeros(len(Z))
    for e in _engines(tmap, Z, comps):
        total = total + e.pair_hessian(i, j)
    return float(total[0]) if single else total


def coeff_gradient_log_pullback(tmap: TriangularMap, z) -> np.ndarray:
    """Gradient of :func:`log_pullback` at a single point with respect to all coefficients."""
    Z, _ = _as_points(z)
    if len(Z) != 1:
        raise ValueError("expected a single point")
    return np.concatenate([e.sample_gradients(np.ones(1)) for e in _engines(tmap, Z)])


def _component_at(comp: MapComponent, Z: np.ndarray, t: np.ndarray, quadrature_order, eps):
    Zt = Z.copy()
    Zt[:, comp.index] = t
    e = ComponentEngine(comp, Zt, quadrature_order, eps)
    return e.S, e.g


def invert(tmap: TriangularMap, x, tol: float = 1e-12, max_doublings: int = 200):
    """Solve ``S(z) = x`` one component at a time.

    Each component is strictly increasing in its last input, so a bracket is
    grown by doubling and then refined by safeguarded Newton steps.
    """
    X, single = _as_points(x)
    n, d = X.shape
    Z = np.zeros_like(X)
    q, eps = tmap.quadrature_order, tmap.eps
    for comp in tmap.components:
        k = comp.index
        target = X[:, k]
        lo, hi = -np.ones(n), np.ones(n)
        for _ in range(max_doublings):
            s_lo, _ = _component_at(comp, Z, lo, q, eps)
            s_hi, _ = _component_at(comp, Z, hi, q, eps)
            bad_lo, bad_hi = s_lo > target, s_hi < target
            if not (bad_lo.any() or bad_hi.any()):
                break
            lo = np.where(bad_lo, 2.0 * lo, lo)
            hi = np.where(bad_hi, 2.0 * hi, hi)
        else:
            raise NoConvergence(f"could not bracket the root of component {k + 1}")
        t = 0.5 * (lo + hi)
        for _ in range(400):
            s, ds = _component_at(comp, Z, t, q, eps)
            r = s - target
            done = np.abs(r) <= tol * (1.0 + np.abs(target))
            if done.all():
                break
            lo = np.where(r < 0, t, lo)
            hi = np.where(r > 0, t, hi)
            newton = t - r / ds
            inside = (newton > lo) & (newton < hi)
            t = np.where(done, t, np.where(inside, newton, 0.5 * (lo + hi)))
        else:
            raise NoConvergence(f"root solve of component {k + 1} did not converge")
        Z[:, k] = t
    return Z[0] if single else Z


def map_to_json(tmap: TriangularMap) -> dict:
    return {
        "dimension": tmap.dim,
        "quadrature_order": tmap.quadrature_order,
        "eps": tmap.eps,
        "sparsity": sorted([list(p) for p in tmap.sparsity.pairs]),
        "components": [
            {
                "index": c.index,
                "c_basis": c.c_basis.to_json(),
                "h_basis": c.h_basis.to_json(),
                "c_coeffs": c.c_coeffs.tolist(),
                "h_coeffs": c.h_coeffs.tolist(),
            }
            for c in tmap.components
        ],
    }


def map_from_json(obj: dict) -> TriangularMap:
    comps = [
        MapComponent(
            int(c["index"]),
            BasisSet.from_json(c["c_basis"]),
            BasisSet.from_json(c["h_basis"]),
            np.asarray(c["c_coeffs"], dtype=float),
            np.asarray(c["h_coeffs"], dtype=float),
        )
        for c in obj["components"]
    ]
    pattern = SparsityPattern(frozenset(tuple(p) for p in obj.get("sparsity", [])))
    return TriangularMap(comps, pattern, int(obj["quadrature_order"]), float(obj["eps"]))
