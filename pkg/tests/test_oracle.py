import math

import numpy as np
import pytest

from sing.datasets import RngStream, chain_precision
from sing.numerics import NotPositiveDefinite
from sing.oracle import (
    CmiEstimate,
    GaussianDensity,
    check_theorem1_bound,
    gaussian_log_sobolev_constant,
    gaussian_score,
    nested_mc_cmi,
)


def test_gaussian_score_examples():
    s = gaussian_score(chain_precision(3))
    assert abs(s.omega[0, 1] - 0.04) < 1e-15 and s.omega[0, 2] == 0
    assert np.all(gaussian_score(np.eye(4)).omega == 0)
    P = np.linalg.inv([[1, 0.5], [0.5, 1]])
    assert abs(P[0, 1] + 2 / 3) < 1e-12
    assert abs(gaussian_score(P).omega[0, 1] - 4 / 9) < 1e-12


def test_log_sobolev_constant():
    assert abs(gaussian_log_sobolev_constant(np.eye(3)) - 1) < 1e-10
    assert abs(gaussian_log_sobolev_constant([[1, 0.5], [0.5, 1]]) - 1.5) < 1e-9
    assert abs(gaussian_log_sobolev_constant(np.diag([2.0, 3.0])) - 3) < 1e-9
    with pytest.raises(NotPositiveDefinite):
        gaussian_log_sobolev_constant([[1, 2], [2, 1]])


def test_theorem1_examples():
    cmi, bound, holds = check_theorem1_bound(0.5)
    assert abs(cmi - 0.1438410362) < 1e-9 and abs(bound - 1.0) < 1e-9 and holds
    assert check_theorem1_bound(0.0) == (0.0, 0.0, True)
    for rho in np.arange(1, 10) / 10:
        cmi, bound, holds = check_theorem1_bound(rho)
        assert holds and bound <= 4 * (rho / (1 - rho**2)) ** 2 + 1e-12
    with pytest.raises(ValueError):
        check_theorem1_bound(1.0)


@pytest.mark.parametrize("rho", [0.5, 0.9])
def test_nested_mc_bivariate(rho):
    est = nested_mc_cmi(GaussianDensity([[1, rho], [rho, 1]]), 0, 1, 4000, 500, RngStream(11))
    exact = -0.5 * math.log(1 - rho**2)
    assert abs(est.value - exact) <= 3 * est.std_error


def test_nested_mc_product_density():
    est = nested_mc_cmi(GaussianDensity(np.diag([1.0, 2.0, 0.5])), 0, 2, 3000, 300, RngStream(12))
    assert abs(est.value) <= 3 * est.std_error


def test_nested_mc_trivariate_conditional():
    C = np.linalg.inv(chain_precision(3, 0.4))
    P = np.linalg.inv(C)
    r = -P[0, 1] / math.sqrt(P[0, 0] * P[1, 1])
    est = nested_mc_cmi(GaussianDensity(C), 0, 1, 3000, 300, RngStream(13))
    assert abs(est.value + 0.5 * math.log(1 - r * r)) <= 3 * est.std_error


def test_cmi_estimate_validation():
    with pytest.raises(ValueError):
        CmiEstimate(0.1, 0, 1, 0.0)
    assert CmiEstimate(0.1, 1, 1, 0.0).to_json()["units"] == "nats"
    with pytest.raises(ValueError):
        nested_mc_cmi(GaussianDensity(np.eye(2)), 0, 0)
