import numpy as np
import pytest

from src.core.problems import quadratic_instance


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run full-size Monte-Carlo tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def half_square():
    """f(x) = 0.5 x^2 in one dimension, noiseless."""
    return quadratic_instance([[1.0]], [0.0])


@pytest.fixture
def diag_quadratic():
    """5-D diagonal quadratic with kappa = 16 and a nonzero minimizer."""
    A = np.diag([1.0, 2.0, 4.0, 8.0, 16.0])
    return quadratic_instance(A, np.array([1.0, -1.0, 0.5, 0.0, 2.0]))
