"""Conditional-independence scores from a fitted map, their delta-method
variances, and the variance-scaled threshold estimator."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg as sla

from ._parallel import pmap
from .graph import UndirectedGraph
from .numerics import NotPositiveDefinite, cholesky
from .optimize import fisher_blocks
from .transport import ComponentEngine, TriangularMap

__all__ = [
    "ScoreMatrix",
    "ThresholdedScore",
    "estimate_score",
    "estimate_variances",
    "threshold",
    "score_pairs",
]


@dataclass
class ScoreMatrix:
    """Symmetric score estimates; ``variance[i, j]`` holds the squared
    delta-method scale (the per-sample variance, before dividing by n)."""

    omega: np.ndarray
    n: int
    variance: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.omega.shape[0]

    @property
    def upsilon(self) -> np.ndarray:
        if self.variance is None:
            raise ValueError("variances not estimated")
        return np.sqrt(self.variance)

    def to_csv(self, which: str = "omega") -> str:
        mat = self.omega if which == "omega" else self.upsilon
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows([[repr(float(x)) for x in row] for row in mat])
        return buf.getvalue()


@dataclass
class ThresholdedScore:
    base: ScoreMatrix
    tau: np.ndarray
    kept: UndirectedGraph
    c: float
    tau0: float

    @property
    def omega_bar(self) -> np.ndarray:
        out = np.zeros_like(self.base.omega)
        for i, j in self.kept.edges:
            out[i - 1, j - 1] = out[j - 1, i - 1] = self.base.omega[i - 1, j - 1]
        return out

    def metadata(self) -> dict:
        return {
            "n": self.base.n,
            "c": self.c,
            "tau0": self.tau0,
            "threshold_scaling": "c*sqrt(log n)",
            "kept_edges": self.kept.sorted_edges(),
        }


def _engines(tmap: TriangularMap, data, engines):
    if engines is not None:
        return engines
    Z = np.atleast_2d(np.asarray(data, dtype=float))
    return pmap(lambda c: ComponentEngine(c, Z, tmap.quadrature_order, tmap.eps), tmap.components)


def _component_pairs(e: ComponentEngine) -> list[tuple[int, int]]:
    inputs = e.comp.inputs
    return [(i, j) for a, i in enumerate(inputs) for j in inputs[a + 1:]]


def score_pairs(tmap: TriangularMap, data=None, engines=None) -> dict[tuple[int, int], np.ndarray]:
    """Per-sample mixed log-density derivatives for every pair that any component couples."""
    engines = _engines(tmap, data, engines)
    parts = pmap(lambda e: {p: e.pair_hessian(*p) for p in _component_pairs(e)}, engines)
    total: dict[tuple[int, int], np.ndarray] = {}
    for part in parts:
        for p, v in part.items():
            total[p] = total[p] + v if p in total else v
    return total


def estimate_score(tmap: TriangularMap, data=None, engines=None, pairs=None) -> ScoreMatrix:
    """Sample average of the squared mixed second derivatives of the log pullback."""
    engines = _engines(tmap, data, engines)
    pairs = score_pairs(tmap, engines=engines) if pairs is None else pairs
    d, n = tmap.dim, engines[0].n
    omega = np.zeros((d, d))
    for (i, j), v in pairs.items():
        omega[i, j] = omega[j, i] = float(np.mean(v * v))
    return ScoreMatrix(omega, n)


def estimate_variances(tmap: TriangularMap, data=None, fisher=None, engines=None,
                       score: ScoreMatrix | None = None, pairs=None) -> ScoreMatrix:
    """Delta-method scales ``grad^T Gamma^-1 grad`` for every score entry.

    ``fisher`` is either the full Fisher matrix or its per-component blocks;
    it defaults to the ridged empirical Fisher information at ``tmap``.
    """
    engines = _engines(tmap, data, engines)
    pairs = score_pairs(tmap, engines=engines) if pairs is None else pairs
    if score is None:
        score = estimate_score(tmap, engines=engines, pairs=pairs)
    if fisher is None:
        blocks = fisher_blocks(tmap, engines=engines)
    elif isinstance(fisher, (list, tuple)):
        blocks = list(fisher)
    else:
        fisher = np.asarray(fisher, dtype=float)
        if fisher.shape != (tmap.n_coeffs, tmap.n_coeffs):
            raise ValueError("Fisher matrix size does not match the coefficient count")
        blocks = [fisher[s, s] for s in tmap.coeff_slices()]
    n = engines[0].n

    def component_terms(args):
        e, block = args
        plist = _component_pairs(e)
        if not plist:
            return {}
        G = np.column_stack([e.pair_hessian_grad(i, j, (2.0 / n) * pairs[(i, j)]) for i, j in plist])
        try:
            low = cholesky(block)
        except NotPositiveDefinite as exc:
            raise NotPositiveDefinite(f"Fisher block of component {e.k + 1}: {exc}") from None
        X = sla.cho_solve((low, True), G, check_finite=False)
        quad = np.einsum("ap,ap->p", G, X)
        return dict(zip(plist, quad))

    parts = pmap(component_terms, list(zip(engines, blocks)))
    d = tmap.dim
    var = np.zeros((d, d))
    for part in parts:
        for (i, j), v in part.items():
            var[i, j] += v
            var[j, i] += v
    return replace(score, variance=np.maximum(var, 0.0))


def threshold(score: ScoreMatrix, c: float = 1.0, tau0: float = 0.0) -> ThresholdedScore:
    """Keep entries with ``omega >= tau0 + c sqrt(log n) upsilon / sqrt(n)``.

    Entries that are exactly zero are never kept.
    """
    if score.variance is None:
        raise ValueError("threshold needs variances")
    if score.n < 2 or c <= 0 or tau0 < 0:
        raise ValueError("need n >= 2, c > 0 and tau0 >= 0")
    n = score.n
    tau = tau0 + c * math.sqrt(math.log(n)) * score.upsilon / math.sqrt(n)
    d = score.dim
    kept = frozenset(
        (i + 1, j + 1)
        for i in range(d)
        for j in range(i + 1, d)
        if score.omega[i, j] >= tau[i, j] and score.omega[i, j] > 0.0
    )
    return ThresholdedScore(score, tau, UndirectedGraph(d, kept), c, tau0)
