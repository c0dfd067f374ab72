"""Total-degree multi-index sets and tensorized Hermite-function bases.

Univariate elements are ``1`` and ``x`` for degrees 0 and 1, and the weighted
probabilists' Hermite polynomial ``He_j(x) exp(-x^2/4)`` for ``j >= 2``.  Keeping
the two lowest elements unweighted makes affine maps exactly representable.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

__all__ = [
    "UnsupportedDerivativeOrder",
    "BasisSet",
    "total_degree_set",
    "univariate_table",
    "BasisEvaluator",
    "eval_basis",
]

MAX_DERIVATIVE = 2


class UnsupportedDerivativeOrder(ValueError):
    pass


@dataclass(frozen=True)
class BasisSet:
    """Multi-indices over an ordered tuple of (0-based) input variables.

    ``indices[a, v]`` is the degree of ``active_variables[v]`` in element ``a``.
    """

    active_variables: tuple[int, ...]
    indices: np.ndarray
    max_total_degree: int
    _position: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 2:
            idx = idx.reshape(-1, len(self.active_variables))
        if idx.shape[1] != len(self.active_variables):
            raise ValueError("multi-index length must equal the number of active variables")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "_position", {v: i for i, v in enumerate(self.active_variables)})
        if len({tuple(r) for r in idx}) != len(idx):
            raise ValueError("duplicate multi-indices")
        if len(idx) and idx.sum(axis=1).max() > self.max_total_degree:
            raise ValueError("multi-index exceeds the maximum total degree")

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def max_degree(self) -> int:
        return int(self.indices.max()) if self.indices.size else 0

    def position(self, var: int) -> int | None:
        return self._position.get(var)

    def degrees_of(self, var: int) -> np.ndarray:
        """Per-element degree in ``var`` (zeros if ``var`` is inactive)."""
        pos = self._position.get(var)
        if pos is None:
            return np.zeros(len(self), dtype=np.int64)
        return self.indices[:, pos]

    def to_json(self) -> dict:
        return {
            "active_variables": list(self.active_variables),
            "indices": self.indices.tolist(),
            "max_total_degree": self.max_total_degree,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "BasisSet":
        active = tuple(int(v) for v in obj["active_variables"])
        idx = np.asarray(obj["indices"], dtype=np.int64).reshape(len(obj["indices"]), len(active))
        return cls(active, idx, int(obj["max_total_degree"]))


def total_degree_set(active_variables, max_degree: int) -> BasisSet:
    """All multi-indices of total degree ``<= max_degree`` over ``active_variables``.

    Elements are graded by total degree; within a degree the first variable's
    exponent decreases, e.g. ``(0,0), (1,0), (0,1), (2,0), (1,1), (0,2)``.
    Constant and linear terms are part of every total-degree set with
    ``max_degree >= 1``.
    """
    active = tuple(int(v) for v in active_variables)
    if any(b <= a for a, b in zip(active, active[1:])):
        raise ValueError("active variables must be strictly increasing")
    if max_degree < 0:
        raise ValueError("max_degree must be non-negative")
    k = len(active)
    rows = [
        m
        for m in itertools.product(range(max_degree + 1), repeat=k)
        if sum(m) <= max_degree
    ]
    rows.sort(key=lambda m: (sum(m), tuple(-x for x in m)))
    return BasisSet(active, np.array(rows, dtype=np.int64).reshape(len(rows), k), max_degree)


def univariate_table(x, max_degree: int, order: int = 0) -> np.ndarray:
    """Values (or derivatives) of univariate elements ``0..max_degree`` at ``x``.

    Returns an array of shape ``(len(x), max_degree + 1)``.
    """
    if order > MAX_DERIVATIVE or order < 0:
        raise UnsupportedDerivativeOrder(f"derivative order {order} not supported")
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    he = np.empty((n, max_degree + 1))
    he[:, 0] = 1.0
    if max_degree >= 1:
        he[:, 1] = x
    for j in range(1, max_degree):
        he[:, j + 1] = x * he[:, j] - j * he[:, j - 1]

    out = np.zeros((n, max_degree + 1))
    if order == 0:
        out[:, : min(2, max_degree + 1)] = he[:, : min(2, max_degree + 1)]
    elif order == 1 and max_degree >= 1:
        out[:, 1] = 1.0
    if max_degree < 2:
        return out

    j = np.arange(2, max_degree + 1)
    w = np.exp(-0.25 * x * x)[:, None]
    h = he[:, 2:]
    dh = j * he[:, 1:-1]
    xc = x[:, None]
    if order == 0:
        out[:, 2:] = h * w
    elif order == 1:
        out[:, 2:] = (dh - 0.5 * xc * h) * w
    else:
        d2h = j * (j - 1) * he[:, :-2]
        out[:, 2:] = (d2h - xc * dh + (0.25 * xc * xc - 0.5) * h) * w
    return out


class BasisEvaluator:
    """Cached evaluation of one basis set and its input derivatives at fixed points.

    ``columns`` maps each active variable to a 1-d array of its values, all of
    equal length.  A derivative pattern is a tuple of ``(variable, order)``
    pairs; the result is ``(cols, values)`` where ``values[:, c]`` holds the
    derivative of element ``cols[c]`` and every element outside ``cols`` is
    identically zero for that pattern.
    """

    def __init__(self, basis: BasisSet, columns: Mapping[int, np.ndarray], n_points: int | None = None):
        self.basis = basis
        if n_points is None:
            n_points = len(next(iter(columns.values()))) if columns else 1
        self.n_points = n_points
        self._columns = columns
        self._tables: dict[tuple[int, int], np.ndarray] = {}
        self._cache: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}

    def _table(self, var: int, order: int) -> np.ndarray:
        key = (var, order)
        if key not in self._tables:
            deg = int(self.basis.degrees_of(var).max(initial=0))
            self._tables[key] = univariate_table(self._columns[var], max(deg, 1), order)
        return self._tables[key]

    def matrix(self, pattern: tuple = ()) -> tuple[np.ndarray, np.ndarray]:
        pattern = tuple(sorted(pattern))
        hit = self._cache.get(pattern)
        if hit is not None:
            return hit
        b = self.basis
        orders = dict(pattern)
        for var, o in orders.items():
            if o > MAX_DERIVATIVE:
                raise UnsupportedDerivativeOrder(f"derivative order {o} not supported")
        keep = np.ones(len(b), dtype=bool)
        for var, o in orders.items():
            if o > 0:
                keep &= b.degrees_of(var) >= o
        cols = np.flatnonzero(keep)
        values = np.ones((self.n_points, len(cols)))
        if len(cols):
            for var in b.active_variables:
                degs = b.degrees_of(var)[cols]
                o = orders.get(var, 0)
                if o == 0 and not degs.any():
                    continue
                values *= self._table(var, o)[:, degs]
        self._cache[pattern] = (cols, values)
        return cols, values

    def dot(self, coeffs: np.ndarray, pattern: tuple = ()) -> np.ndarray:
        cols, values = self.matrix(pattern)
        if not len(cols):
            return np.zeros(self.n_points)
        return values @ coeffs[cols]

    def tdot(self, weights: np.ndarray, pattern: tuple = ()) -> np.ndarray:
        """``sum_l weights[l] * d(pattern) element(point_l)`` for every element."""
        out = np.zeros(len(self.basis))
        cols, values = self.matrix(pattern)
        if len(cols):
            out[cols] = weights @ values
        return out

    def full(self, pattern: tuple = ()) -> np.ndarray:
        out = np.zeros((self.n_points, len(self.basis)))
        cols, values = self.matrix(pattern)
        out[:, cols] = values
        return out


def eval_basis(b: BasisSet, point, derivative_orders: Mapping[int, int] | None = None) -> np.ndarray:
    """Evaluate every element of ``b`` at ``point``.

    ``point`` is a full input vector (indexed by global variable number) or a
    2-d array of such vectors; ``derivative_orders`` maps global variable
    indices to derivative orders in ``{0, 1, 2}``.
    """
    pts = np.asarray(point, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    orders = dict(derivative_orders or {})
    for o in orders.values():
        if o > MAX_DERIVATIVE or o < 0:
            raise UnsupportedDerivativeOrder(f"derivative order {o} not supported")
    pattern = tuple((v, o) for v, o in orders.items() if o > 0)
    if any(b.position(v) is None for v, _ in pattern):
        out = np.zeros((len(pts), len(b)))
    else:
        ev = BasisEvaluator(b, {v: pts[:, v] for v in b.active_variables}, len(pts))
        out = ev.full(pattern)
    return out[0] if single else out
