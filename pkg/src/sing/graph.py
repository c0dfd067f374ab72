"""Undirected graphs, elimination-based map sparsity bounds and variable orderings.

Nodes are 1-based throughout this module.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .transport import SparsityPattern

__all__ = [
    "DimensionMismatch",
    "UndirectedGraph",
    "Ordering",
    "sparsity_bound",
    "min_degree_elimination",
    "reverse_cholesky_ordering",
    "relabel",
    "edge_errors",
]


class DimensionMismatch(ValueError):
    pass


def _canon(i: int, j: int) -> tuple[int, int]:
    i, j = int(i), int(j)
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class UndirectedGraph:
    d: int
    edges: frozenset = frozenset()

    def __post_init__(self):
        edges = frozenset(_canon(i, j) for i, j in self.edges)
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (1 <= i and j <= self.d):
                raise ValueError(f"edge {(i, j)} outside 1..{self.d}")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def complete(cls, d: int) -> "UndirectedGraph":
        return cls(d, frozenset((i, j) for i in range(1, d + 1) for j in range(i + 1, d + 1)))

    @classmethod
    def from_adjacency(cls, adj) -> "UndirectedGraph":
        a = np.asarray(adj)
        d = a.shape[0]
        return cls(d, frozenset((i + 1, j + 1) for i in range(d) for j in range(i + 1, d) if a[i, j] or a[j, i]))

    def __len__(self) -> int:
        return len(self.edges)

    def neighbors(self) -> dict[int, set[int]]:
        nb = {v: set() for v in range(1, self.d + 1)}
        for i, j in self.edges:
            nb[i].add(j)
            nb[j].add(i)
        return nb

    def degrees(self) -> list[int]:
        nb = self.neighbors()
        return [len(nb[v]) for v in range(1, self.d + 1)]

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.d, self.d), dtype=int)
        for i, j in self.edges:
            a[i - 1, j - 1] = a[j - 1, i - 1] = 1
        return a

    def sorted_edges(self) -> list[list[int]]:
        return [list(e) for e in sorted(self.edges)]

    def to_json(self) -> dict:
        return {"d": self.d, "edges": self.sorted_edges()}

    @classmethod
    def from_json(cls, obj) -> "UndirectedGraph":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(int(obj["d"]), frozenset(tuple(e) for e in obj["edges"]))


@dataclass(frozen=True)
class Ordering:
    """``perm[p - 1]`` is the original node placed at position ``p``."""

    perm: tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(v) for v in self.perm)
        if sorted(perm) != list(range(1, len(perm) + 1)):
            raise ValueError(f"not a permutation of 1..{len(perm)}: {perm}")
        object.__setattr__(self, "perm", perm)

    @classmethod
    def identity(cls, d: int) -> "Ordering":
        return cls(tuple(range(1, d + 1)))

    def __len__(self) -> int:
        return len(self.perm)

    def position(self) -> dict[int, int]:
        """Map original node -> new label."""
        return {v: p + 1 for p, v in enumerate(self.perm)}

    def inverse(self) -> "Ordering":
        pos = self.position()
        return Ordering(tuple(pos[v] for v in range(1, len(self.perm) + 1)))

    def columns(self) -> np.ndarray:
        """0-based column indices that reorder data into this ordering."""
        return np.asarray(self.perm, dtype=int) - 1


def relabel(g: UndirectedGraph, order: Ordering) -> UndirectedGraph:
    """Rename node ``v`` to its position under ``order``."""
    if len(order) != g.d:
        raise DimensionMismatch("ordering and graph sizes differ")
    pos = order.position()
    return UndirectedGraph(g.d, frozenset((pos[i], pos[j]) for i, j in g.edges))


def sparsity_bound(g: UndirectedGraph) -> SparsityPattern:
    """Pairs ``(j, k)`` that component ``k`` of the triangular map can ignore.

    Nodes are eliminated in the order ``d, d-1, ..., 1``; before removing
    node ``k`` its current neighbourhood is turned into a clique, and every
    ``j < k`` outside that neighbourhood is inactive for component ``k``.
    """
    nb = g.neighbors()
    pairs = set()
    for k in range(g.d, 0, -1):
        hood = nb.pop(k)
        pairs.update((j, k) for j in range(1, k) if j not in hood)
        for u in hood:
            nb[u].discard(k)
            nb[u].update(hood - {u})
    return SparsityPattern(frozenset(pairs))


def min_degree_elimination(g: UndirectedGraph) -> list[int]:
    """Greedy minimum-degree elimination sequence.

    Ties go to the largest node index, so an edgeless graph is eliminated
    as ``d, ..., 1``.
    """
    nb = g.neighbors()
    seq = []
    while nb:
        v = min(nb, key=lambda u: (len(nb[u]), -u))
        hood = nb.pop(v)
        for u in hood:
            nb[u].discard(v)
            nb[u].update(hood - {u})
        seq.append(v)
    return seq


def reverse_cholesky_ordering(g: UndirectedGraph) -> Ordering:
    """Reverse of the minimum-degree elimination sequence.

    The first-eliminated node gets the last label, so the descending sweep
    in :func:`sparsity_bound` follows the fill-reducing sequence.
    """
    return Ordering(tuple(reversed(min_degree_elimination(g))))


def edge_errors(truth: UndirectedGraph, estimate: UndirectedGraph) -> tuple[int, int]:
    """``(false positives, false negatives)`` of ``estimate`` against ``truth``."""
    if truth.d != estimate.d:
        raise DimensionMismatch(f"graphs have {truth.d} and {estimate.d} nodes")
    return len(estimate.edges - truth.edges), len(truth.edges - estimate.edges)


def graph_from_pairs(d: int, pairs: Iterable) -> UndirectedGraph:
    return UndirectedGraph(d, frozenset(tuple(p) for p in pairs))
