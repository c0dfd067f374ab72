import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sing.numerics import (
    NotPositiveDefinite,
    cholesky,
    finite_difference_gradient,
    gauss_legendre,
    solve_spd,
)


def _spd(rng, n):
    A = rng.standard_normal((n, n))
    return A @ A.T + n * np.eye(n)


def test_cholesky_identity():
    assert np.array_equal(cholesky(np.eye(3)), np.eye(3))


def test_cholesky_hand_factor():
    L = cholesky(np.array([[4.0, 2.0], [2.0, 5.0]]))
    np.testing.assert_allclose(L, [[2, 0], [1, 2]], atol=1e-14)


def test_cholesky_indefinite_raises():
    with pytest.raises(NotPositiveDefinite):
        cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_cholesky_singular_covariance_raises():
    x = np.random.default_rng(0).standard_normal((2, 4))
    with pytest.raises(NotPositiveDefinite):
        cholesky(np.cov(x.T, bias=True))


def test_solve_spd_simple():
    np.testing.assert_allclose(solve_spd(np.eye(3), [1, 2, 3]), [1, 2, 3])
    np.testing.assert_allclose(solve_spd(np.diag([2.0, 4.0]), [2.0, 4.0]), [1, 1])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 50), st.integers(0, 2**31))
def test_spd_residuals(n, seed):
    rng = np.random.default_rng(seed)
    a = _spd(rng, n)
    L = cholesky(a)
    assert np.linalg.norm(L @ L.T - a) / np.linalg.norm(a) < 1e-10
    b = rng.standard_normal(n)
    x = solve_spd(a, b)
    assert np.linalg.norm(a @ x - b) / np.linalg.norm(b) < 1e-8


def test_gauss_legendre_small_orders():
    r1 = gauss_legendre(1)
    np.testing.assert_allclose(r1.nodes, [0.0], atol=1e-15)
    np.testing.assert_allclose(r1.weights, [2.0])
    r2 = gauss_legendre(2)
    np.testing.assert_allclose(np.sort(r2.nodes), [-1 / np.sqrt(3), 1 / np.sqrt(3)], atol=1e-15)
    np.testing.assert_allclose(r2.weights, [1.0, 1.0], atol=1e-15)


def test_gauss_legendre_x14():
    r = gauss_legendre(8)
    assert abs(r.weights @ r.nodes**14 - 2 / 15) < 1e-12


@pytest.mark.parametrize("k", [1, 2, 5, 10, 32, 64])
def test_gauss_legendre_exactness(k):
    r = gauss_legendre(k)
    for p in range(0, 2 * k, max(1, k // 3)):
        exact = 2.0 / (p + 1) if p % 2 == 0 else 0.0
        assert abs(r.weights @ r.nodes**p - exact) < 1e-12
    assert abs(r.weights @ r.nodes ** (2 * k - 1)) < 1e-12


def test_finite_difference_gradient():
    np.testing.assert_allclose(finite_difference_gradient(lambda x: x[0] ** 2, [3.0]), [6.0], atol=1e-8)
    np.testing.assert_array_equal(finite_difference_gradient(lambda x: 7.0, np.zeros(3)), np.zeros(3))
    g = finite_difference_gradient(lambda x: np.sin(x[0]) + x[1] ** 2, [0.0, 1.0])
    np.testing.assert_allclose(g, [1.0, 2.0], atol=1e-8)
