import numpy as np
import pytest

from sing.datasets import RngStream, chain_precision, gen_butterfly, gen_gaussian
from sing.graph import UndirectedGraph
from sing.structure import DegenerateColumn, SingConfig, n_sing, sing, standardize

CHAIN = {(1, 2), (2, 3)}


def test_standardize_examples():
    z, m, s = standardize(np.array([[1.0], [3.0]]))
    np.testing.assert_allclose(z[:, 0], [-1, 1])
    assert m[0] == 2 and s[0] == 1
    x = np.random.default_rng(0).standard_normal((50, 2))
    x, _, _ = standardize(x)
    np.testing.assert_allclose(standardize(x)[0], x, atol=1e-12)
    with pytest.raises(DegenerateColumn):
        standardize(np.array([[1.0, 2.0], [1.0, 3.0]]))


def test_config_validation():
    for bad in ({"degree": 0}, {"c": 0}, {"tau0": -1}, {"max_iterations": 0}):
        with pytest.raises(ValueError):
            SingConfig(**bad)


def test_n_sing_chain():
    z, _ = gen_gaussian(chain_precision(3), 5000, RngStream(0))
    g, s = n_sing(z, SingConfig())
    assert g.edges == CHAIN
    assert s.omega.shape == (3, 3)


def test_n_sing_independent():
    z = np.random.default_rng(1).standard_normal((5000, 2))
    g, _ = n_sing(z, SingConfig())
    assert len(g) == 0


def test_n_sing_butterfly_linear_is_empty():
    z, _ = gen_butterfly(5, 2000, RngStream(3))
    g, _ = n_sing(z, SingConfig(degree=1))
    assert len(g) == 0


def test_sing_chain_matches_n_sing():
    z, _ = gen_gaussian(chain_precision(3), 5000, RngStream(2))
    cfg = SingConfig()
    rep = sing(z, cfg)
    g, s = n_sing(z, cfg)
    assert rep.final_edges.edges == CHAIN == g.edges
    assert len(rep.iterations) <= 3
    np.testing.assert_array_equal(rep.iterations[0].score_original().omega, s.omega)


def test_report_consistency_and_labels():
    # shuffle columns so the reverse Cholesky ordering is not the identity
    z, _ = gen_gaussian(chain_precision(4), 3000, RngStream(4))
    perm = [2, 0, 3, 1]
    rep = sing(z[:, perm], SingConfig())
    for it in rep.iterations:
        assert it.n_edges == len(it.thresholded.kept)
    inv = {p + 1: i + 1 for i, p in enumerate(perm)}
    truth = {tuple(sorted((inv[a], inv[b]))) for a, b in {(1, 2), (2, 3), (3, 4)}}
    assert rep.final_edges.edges == truth
    js = rep.to_json()
    assert js["edge_counts"] == [it.n_edges for it in rep.iterations]


def test_permutation_equivariance():
    z, _ = gen_gaussian(chain_precision(4), 2000, RngStream(5))
    perm = np.array([3, 1, 0, 2])
    a = sing(z, SingConfig()).final_edges
    b = sing(z[:, perm], SingConfig()).final_edges
    back = UndirectedGraph(4, frozenset((int(perm[i - 1]) + 1, int(perm[j - 1]) + 1) for i, j in b.edges))
    assert back == a


def test_determinism():
    z, _ = gen_butterfly(2, 400, RngStream(6))
    cfg = SingConfig(degree=2)
    assert sing(z, cfg).to_json() == sing(z, cfg).to_json()


def test_stopping_rule_increase_returns_previous(monkeypatch):
    from sing import structure

    counts = iter([5, 3, 4])
    real = structure._one_pass

    def fake(Z, cfg, ordering, pattern):
        it = real(Z, cfg, ordering, pattern)
        k = next(counts)
        edges = frozenset(list(UndirectedGraph.complete(Z.shape[1]).edges)[:k])
        it.edges = UndirectedGraph(Z.shape[1], edges)
        return it

    monkeypatch.setattr(structure, "_one_pass", fake)
    z = np.random.default_rng(0).standard_normal((100, 4))
    rep = sing(z, SingConfig())
    assert [it.n_edges for it in rep.iterations] == [5, 3, 4]
    assert rep.final_edges == rep.iterations[1].edges


def test_bad_input():
    with pytest.raises(ValueError):
        sing(np.zeros((1, 3)), SingConfig())
