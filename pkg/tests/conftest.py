import numpy as np
import pytest

from lossrank.cli import load_prostate
from lossrank.linreg_core import Dataset, StandardizedDataset, standardize


def raw_standardized(X, y, names=None):
    """Wrap arrays as a StandardizedDataset without transforming them."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    d = X.shape[1]
    names = names or tuple(f"x{j + 1}" for j in range(d))
    return StandardizedDataset(X, y, np.zeros(d), np.ones(d), 0.0, names)


def random_dataset(rng, n, d, k=None, noise=1.0):
    X = rng.standard_normal((n, d))
    beta = np.zeros(d)
    k = min(d, 3) if k is None else k
    beta[rng.choice(d, size=k, replace=False)] = rng.uniform(1, 3, size=k) * rng.choice([-1, 1], size=k)
    y = X @ beta + noise * rng.standard_normal(n)
    return Dataset(X, y)


@pytest.fixture(scope="session")
def prostate():
    return load_prostate()


@pytest.fixture(scope="session")
def prostate_std(prostate):
    return standardize(prostate)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def record_acceptance(number, passed, detail):
    line = f"ACCEPTANCE {number}: {'PASS' if passed else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
