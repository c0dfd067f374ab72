"""Graph learning drivers: the one-shot estimator and the iterative algorithm
that feeds each estimated graph back as a map sparsity pattern."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .graph import Ordering, UndirectedGraph, relabel, reverse_cholesky_ordering, sparsity_bound
from .optimize import FitResult, fisher_blocks, fit_map
from .score import ScoreMatrix, ThresholdedScore, estimate_score, estimate_variances, score_pairs, threshold
from .transport import DEFAULT_QUAD_ORDER, SparsityPattern

__all__ = [
    "DegenerateColumn",
    "SingConfig",
    "SingIteration",
    "SingReport",
    "standardize",
    "n_sing",
    "sing",
]

log = logging.getLogger(__name__)


class DegenerateColumn(ValueError):
    pass


@dataclass(frozen=True)
class SingConfig:
    degree: int = 1
    c: float = 1.0
    tau0: float = 0.0
    max_iterations: int = 10
    quadrature_order: int = DEFAULT_QUAD_ORDER
    seed: int = 0
    standardize: bool = True

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if not self.c > 0:
            raise ValueError("c must be positive")
        if self.tau0 < 0:
            raise ValueError("tau0 must be non-negative")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    def to_json(self) -> dict:
        return {
            "beta": self.degree,
            "c": self.c,
            "tau0": self.tau0,
            "max_iterations": self.max_iterations,
            "quadrature_order": self.quadrature_order,
            "seed": self.seed,
            "standardize": self.standardize,
        }


@dataclass
class SingIteration:
    """One pass of the algorithm.  ``pattern`` and the score matrices are in the
    permuted labelling given by ``ordering``; ``edges`` uses original labels."""

    ordering: Ordering
    pattern: SparsityPattern
    thresholded: ThresholdedScore
    edges: UndirectedGraph
    fit: FitResult = field(repr=False)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def score_original(self) -> ScoreMatrix:
        """Score matrix with rows/columns restored to the original variable order."""
        inv = self.ordering.inverse().columns()
        s = self.thresholded.base
        var = None if s.variance is None else s.variance[np.ix_(inv, inv)]
        return ScoreMatrix(s.omega[np.ix_(inv, inv)], s.n, var)

    def tau_original(self) -> np.ndarray:
        inv = self.ordering.inverse().columns()
        return self.thresholded.tau[np.ix_(inv, inv)]

    def to_json(self) -> dict:
        return {
            "ordering": list(self.ordering.perm),
            "sparsity_pattern": sorted([list(p) for p in self.pattern.pairs]),
            "n_edges": self.n_edges,
            "edges": self.edges.sorted_edges(),
            "omega": self.score_original().omega.tolist(),
            "upsilon": self.score_original().upsilon.tolist(),
            "tau": self.tau_original().tolist(),
            "fit": self.fit.to_json(),
        }


@dataclass
class SingReport:
    iterations: list[SingIteration]
    final_edges: UndirectedGraph
    stopped_reason: str
    config: SingConfig

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "stopped_reason": self.stopped_reason,
            "final_edges": self.final_edges.to_json(),
            "edge_counts": [it.n_edges for it in self.iterations],
            "iterations": [it.to_json() for it in self.iterations],
        }


def standardize(data) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Center each column and scale it to unit (1/n) standard deviation."""
    Z = np.atleast_2d(np.asarray(data, dtype=float))
    mean = Z.mean(axis=0)
    std = Z.std(axis=0)
    bad = np.flatnonzero(std < 1e-12)
    if len(bad):
        raise DegenerateColumn(f"column(s) {(bad + 1).tolist()} have zero variance")
    return (Z - mean) / std, mean, std


def _one_pass(Z: np.ndarray, cfg: SingConfig, ordering: Ordering, pattern: SparsityPattern) -> SingIteration:
    Zp = Z[:, ordering.columns()]
    fit = fit_map(Zp, pattern, cfg.degree, cfg.quadrature_order, keep_engines=True)
    engines = fit.engines
    pairs = score_pairs(fit.map, engines=engines)
    score = estimate_score(fit.map, engines=engines, pairs=pairs)
    score = estimate_variances(fit.map, fisher=fisher_blocks(fit.map, engines=engines), engines=engines,
                               score=score, pairs=pairs)
    thr = threshold(score, cfg.c, cfg.tau0)
    edges = relabel(thr.kept, ordering.inverse())
    fit.engines = None
    return SingIteration(ordering, pattern, thr, edges, fit)


def _prepare(data, cfg: SingConfig) -> np.ndarray:
    Z = np.atleast_2d(np.asarray(data, dtype=float))
    n, d = Z.shape
    if n < 2 or d < 2:
        raise ValueError("need n >= 2 samples of d >= 2 variables")
    if cfg.standardize:
        Z, _, _ = standardize(Z)
    return Z


def n_sing(data, cfg: SingConfig) -> tuple[UndirectedGraph, ScoreMatrix]:
    """Dense-map estimate of the edge set and the score matrix behind it."""
    Z = _prepare(data, cfg)
    d = Z.shape[1]
    it = _one_pass(Z, cfg, Ordering.identity(d), SparsityPattern())
    return it.edges, it.thresholded.base


def sing(data, cfg: SingConfig) -> SingReport:
    """Iterate map fitting, scoring and thresholding under graph-induced sparsity.

    The first pass uses a dense triangular map.  Each later pass reorders the
    variables with the reverse Cholesky ordering of the previous graph and
    fits a map restricted to the implied sparsity pattern.  Iteration stops
    once the edge count stops decreasing: on a tie the newest graph is
    returned, on an increase the previous one.
    """
    Z = _prepare(data, cfg)
    d = Z.shape[1]
    ordering, pattern = Ordering.identity(d), SparsityPattern()
    iterations: list[SingIteration] = []
    final, reason = None, "max-iterations"
    for t in range(cfg.max_iterations):
        it = _one_pass(Z, cfg, ordering, pattern)
        iterations.append(it)
        log.info("iteration %d: %d edges (pattern size %d)", t + 1, it.n_edges, len(pattern))
        if t > 0:
            prev = iterations[-2]
            if it.n_edges >= prev.n_edges:
                final = it.edges if it.n_edges == prev.n_edges else prev.edges
                reason = "edge-count-non-decreasing"
                break
        ordering = reverse_cholesky_ordering(it.edges)
        pattern = sparsity_bound(relabel(it.edges, ordering))
    if final is None:
        final = iterations[-1].edges
    return SingReport(iterations, final, reason, cfg)
