import numpy as np
import pytest

from sing.transport import SparsityPattern, build_map


def random_map(d, degree, rng, pattern=None, scale=0.3):
    """Map with random coefficients around the identity-like start."""
    tmap = build_map(d, degree, pattern or SparsityPattern())
    theta = tmap.coeffs + scale * rng.standard_normal(tmap.n_coeffs)
    return tmap.with_coeffs(theta)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)



CRITERIA_LINES = []


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA_LINES:
            terminalreporter.write_line(line)
