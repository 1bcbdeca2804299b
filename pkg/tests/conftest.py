import numpy as np
import pytest

from ccdglm.doe import design_to_dataset, generate_ccd
from ccdglm.synthetic import HVOF_FACTORS

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


@pytest.fixture(scope="session")
def hvof_ccd():
    return generate_ccd(HVOF_FACTORS, n_center=7, seed=7)


@pytest.fixture(scope="session")
def hvof_dataset(hvof_ccd):
    return design_to_dataset(hvof_ccd)


def random_instance(rng, n=None, p=None, nu=None):
    """Random (beta, nu, X, y) with an intercept column and positive y."""
    n = n or int(rng.integers(5, 40))
    p = p or int(rng.integers(1, 5))
    X = np.column_stack([np.ones(n), rng.uniform(-1.5, 1.5, size=(n, p - 1))])
    beta = rng.normal(0, 0.7, size=p)
    nu = nu or float(rng.uniform(0.5, 20))
    mu = np.exp(X @ beta)
    y = rng.gamma(nu, mu / nu)
    return beta, nu, X, y


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
