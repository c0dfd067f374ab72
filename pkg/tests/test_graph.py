import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sing.graph import (
    DimensionMismatch,
    Ordering,
    UndirectedGraph,
    edge_errors,
    min_degree_elimination,
    relabel,
    reverse_cholesky_ordering,
    sparsity_bound,
)

FIG_A = UndirectedGraph(5, frozenset({(1, 2), (1, 3), (2, 3), (3, 4), (4, 5)}))


def random_graph(d, p, rng):
    return UndirectedGraph(d, frozenset((i, j) for i, j in itertools.combinations(range(1, d + 1), 2) if rng.random() < p))


def test_figure_one_a():
    assert sparsity_bound(FIG_A).pairs == {(1, 4), (2, 4), (1, 5), (2, 5), (3, 5)}


def test_figure_one_b():
    g = relabel(FIG_A, Ordering((1, 2, 5, 3, 4)))
    assert sparsity_bound(g).pairs == {(1, 5), (2, 5)}


def test_complete_graph_no_sparsity():
    assert len(sparsity_bound(UndirectedGraph.complete(6))) == 0


def test_chain_ordering():
    chain = UndirectedGraph(3, frozenset({(1, 2), (2, 3)}))
    o = reverse_cholesky_ordering(chain)
    assert len(sparsity_bound(relabel(chain, o))) == 1


def test_empty_graph_identity_ordering():
    assert reverse_cholesky_ordering(UndirectedGraph(4)).perm == (1, 2, 3, 4)


def test_star_ordering_no_fill():
    star = UndirectedGraph(5, frozenset((1, k) for k in range(2, 6)))
    o = reverse_cholesky_ordering(star)
    assert o.perm[0] == 1
    assert len(sparsity_bound(relabel(star, o))) == 10 - 4


def test_relabel_examples():
    g = UndirectedGraph(3, frozenset({(1, 3)}))
    assert relabel(g, Ordering.identity(3)) == g
    assert relabel(g, Ordering((2, 1, 3))).edges == {(2, 3)}
    with pytest.raises(DimensionMismatch):
        relabel(g, Ordering.identity(4))


def test_edge_errors_examples():
    assert edge_errors(UndirectedGraph(3, {(1, 2)}), UndirectedGraph(3, {(1, 2), (2, 3)})) == (1, 0)
    assert edge_errors(FIG_A, FIG_A) == (0, 0)
    assert edge_errors(UndirectedGraph(4, {(1, 2), (3, 4)}), UndirectedGraph(4)) == (0, 2)
    with pytest.raises(DimensionMismatch):
        edge_errors(UndirectedGraph(3), UndirectedGraph(4))


def test_graph_validation_and_json():
    with pytest.raises(ValueError):
        UndirectedGraph(3, {(1, 1)})
    with pytest.raises(ValueError):
        UndirectedGraph(3, {(1, 4)})
    assert UndirectedGraph(3, {(2, 1)}).edges == {(1, 2)}
    assert UndirectedGraph.from_json(FIG_A.to_json()) == FIG_A
    assert UndirectedGraph.from_adjacency(FIG_A.adjacency()) == FIG_A


def test_ordering_validation():
    with pytest.raises(ValueError):
        Ordering((1, 1, 2))


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 9), st.floats(0.05, 0.9), st.integers(0, 2**31))
def test_bound_shrinks_with_more_edges(d, p, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(d, p, rng)
    extra = random_graph(d, 0.3, rng)
    bigger = UndirectedGraph(d, g.edges | extra.edges)
    assert sparsity_bound(bigger).pairs <= sparsity_bound(g).pairs


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 9), st.floats(0.05, 0.9), st.integers(0, 2**31))
def test_relabel_invariants(d, p, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(d, p, rng)
    o = Ordering(tuple(int(v) + 1 for v in rng.permutation(d)))
    h = relabel(g, o)
    assert len(h) == len(g)
    assert sorted(h.degrees()) == sorted(g.degrees())
    assert relabel(h, o.inverse()) == g
    assert edge_errors(g, g) == (0, 0)


def _is_chordal_peo(g):
    """True when eliminating d..1 adds no fill."""
    nb = g.neighbors()
    for k in range(g.d, 0, -1):
        hood = nb.pop(k)
        for u, v in itertools.combinations(hood, 2):
            if v not in nb[u]:
                return False
        for u in hood:
            nb[u].discard(k)
    return True


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**31))
def test_chordal_bound_is_exact(d, seed):
    # random trees are chordal; the min-degree reversal is a perfect elimination order
    rng = np.random.default_rng(seed)
    edges = {(int(rng.integers(1, k)), k) for k in range(2, d + 1)}
    g = relabel(UndirectedGraph(d, frozenset(edges)), reverse_cholesky_ordering(UndirectedGraph(d, frozenset(edges))))
    assert _is_chordal_peo(g)
    non_adjacent = {(j, k) for j, k in itertools.combinations(range(1, d + 1), 2) if (j, k) not in g.edges}
    assert sparsity_bound(g).pairs == non_adjacent


def test_min_degree_sequence_tiebreak():
    assert min_degree_elimination(UndirectedGraph(3)) == [3, 2, 1]
