import numpy as np
import pytest

from granger_horizons.demo import demo_model
from granger_horizons.var_model import VARModel, check_stability


def random_stable_model(rng, n=None, p=None, radius=None, zero_block=None):
    """Random stable VAR; ``zero_block=(rows, cols)`` forces those cross terms to zero."""
    n = n or int(rng.integers(2, 5))
    p = p or int(rng.integers(1, 5))
    A = rng.standard_normal((p, n, n)) / np.sqrt(n * p)
    if zero_block is not None:
        rows, cols = zero_block
        A[:, np.ix_(rows, cols)[0], np.ix_(rows, cols)[1]] = 0.0
    rho = check_stability(VARModel(A, np.eye(n)))
    target = radius if radius is not None else rng.uniform(0.3, 0.9)
    c = target / rho
    # scaling A_k by c**k scales every companion eigenvalue by c
    A = A * (c ** np.arange(1, p + 1))[:, None, None]
    M = rng.standard_normal((n, n))
    sigma = M @ M.T + n * np.eye(n)
    return VARModel(A, sigma)


@pytest.fixture(scope="session")
def demo():
    return demo_model()


@pytest.fixture
def rng():
    return np.random.default_rng(20190501)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
