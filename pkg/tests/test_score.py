import math

import numpy as np
import pytest

from conftest import random_map
from sing.datasets import chain_precision, cubic_gaussian_precision, gen_gaussian
from sing.optimize import fisher_blocks, fit_affine_closed_form, fit_map
from sing.score import ScoreMatrix, estimate_score, estimate_variances, score_pairs, threshold
from sing.transport import ComponentEngine, build_map, mixed_log_hessian


def test_identity_map_scores_zero(rng):
    z = rng.standard_normal((100, 3))
    s = estimate_score(build_map(3, 2), z)
    assert np.all(s.omega == 0)


def test_affine_chain_scores():
    z, _ = gen_gaussian(chain_precision(3), 20000, np.random.default_rng(0))
    s = estimate_score(fit_affine_closed_form(z).map, z)
    assert abs(s.omega[0, 1] - 0.04) < 0.006
    assert s.omega[0, 2] < 0.002


def test_bivariate_remark_value():
    rho = 0.5
    z, _ = gen_gaussian(np.linalg.inv([[1, rho], [rho, 1]]), 20000, np.random.default_rng(1))
    s = estimate_score(fit_affine_closed_form(z).map, z)
    assert abs(s.omega[0, 1] - 4 / 9) < 0.03


def test_score_matches_mixed_hessian(rng):
    tmap = random_map(4, 2, rng)
    z = rng.standard_normal((50, 4))
    s = estimate_score(tmap, z)
    for i in range(4):
        for j in range(i + 1, 4):
            assert abs(s.omega[i, j] - np.mean(mixed_log_hessian(tmap, z, i, j) ** 2)) < 1e-10


def test_score_order_invariant(rng):
    tmap = random_map(3, 2, rng)
    z = rng.standard_normal((80, 3))
    a = estimate_score(tmap, z).omega
    b = estimate_score(tmap, z[rng.permutation(80)]).omega
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_toy_variance_arithmetic():
    # one coefficient, Gamma = 2, gradient 1 -> 0.5
    g = np.array([1.0])
    assert float(g @ np.linalg.solve(np.array([[2.0]]), g)) == 0.5


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_score_gradient_fd(rng, degree):
    tmap = random_map(3, degree, rng)
    z = rng.standard_normal((40, 3))
    n = len(z)
    for i, j in [(0, 1), (0, 2), (1, 2)]:
        for comp in tmap.components[j:]:
            e = ComponentEngine(comp, z)
            H = score_pairs(tmap, z)[(i, j)]
            grad = e.pair_hessian_grad(i, j, (2.0 / n) * H)
            theta = tmap.coeffs
            sl = tmap.coeff_slices()[comp.index]
            fd = np.empty(sl.stop - sl.start)
            h = 1e-6
            for a in range(len(fd)):
                d = np.zeros_like(theta)
                d[sl.start + a] = h
                up = estimate_score(tmap.with_coeffs(theta + d), z).omega[i, j]
                dn = estimate_score(tmap.with_coeffs(theta - d), z).omega[i, j]
                fd[a] = (up - dn) / (2 * h)
            assert np.linalg.norm(grad - fd) <= 1e-4 * max(1.0, np.linalg.norm(fd))


def test_variance_zero_for_identity(rng):
    z = rng.standard_normal((200, 3))
    tmap = build_map(3, 1)
    s = estimate_variances(tmap, z)
    assert np.all(s.variance == 0)


def test_variances_accept_full_matrix(rng):
    z = rng.standard_normal((300, 3))
    fit = fit_map(z, degree=2)
    from scipy.linalg import block_diag

    a = estimate_variances(fit.map, z)
    b = estimate_variances(fit.map, z, fisher=block_diag(*fisher_blocks(fit.map, z)))
    np.testing.assert_allclose(a.variance, b.variance, rtol=1e-10)
    with pytest.raises(ValueError):
        estimate_variances(fit.map, z, fisher=np.eye(3))


def test_threshold_arithmetic():
    s = ScoreMatrix(np.array([[0, 0.7], [0.7, 0]]), n=math.e, variance=np.ones((2, 2)))
    t = threshold(s, 1.0, 0.0)
    assert abs(t.tau[0, 1] - math.exp(-0.5)) < 1e-15
    assert t.kept.edges == {(1, 2)}


def test_threshold_zero_scores():
    s = ScoreMatrix(np.zeros((3, 3)), n=100, variance=np.zeros((3, 3)))
    assert len(threshold(s).kept) == 0


def test_threshold_monotone(rng):
    om = rng.uniform(0, 1, (6, 6))
    om = om + om.T
    var = rng.uniform(0, 5, (6, 6))
    var = var + var.T
    s = ScoreMatrix(om, 200, var)
    prev = threshold(s, 0.1, 0.0).kept.edges
    for c in (0.5, 1, 2, 4):
        cur = threshold(s, c, 0.0).kept.edges
        assert cur <= prev
        prev = cur
    prev = threshold(s, 1.0, 0.0).kept.edges
    for t0 in (0.1, 0.5, 1.0):
        cur = threshold(s, 1.0, t0).kept.edges
        assert cur <= prev
        prev = cur


def test_kept_matches_raw_fields(rng):
    om = rng.uniform(0, 1, (5, 5))
    om = om + om.T
    s = ScoreMatrix(om, 500, np.full((5, 5), 3.0))
    t = threshold(s, 1.0, 0.2)
    raw = {(i + 1, j + 1) for i in range(5) for j in range(i + 1, 5) if om[i, j] >= t.tau[i, j]}
    assert t.kept.edges == raw
    bar = t.omega_bar
    assert all(bar[i - 1, j - 1] == om[i - 1, j - 1] for i, j in t.kept.edges)


def test_cubic_gaussian_approximation_thresholded():
    # squared precision of the cubic Gaussian approximation, n large enough for (1,2) but not (1,3)
    P = cubic_gaussian_precision()
    om = P**2
    np.fill_diagonal(om, 0)
    n = 10_000
    var = np.full((3, 3), (4e-5) ** 2 * n / math.log(n))
    t = threshold(ScoreMatrix(om, n, var))
    assert t.kept.edges == {(1, 2), (2, 3)}


def test_csv_export():
    s = ScoreMatrix(np.array([[0.0, 0.25], [0.25, 0.0]]), 10, np.full((2, 2), 4.0))
    assert s.to_csv().splitlines() == ["0.0,0.25", "0.25,0.0"]
    assert s.to_csv("upsilon").splitlines()[0] == "2.0,2.0"
