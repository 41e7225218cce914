import numpy as np
import pytest

from otrepair import Dataset

ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail, status=None):
    line = f"criterion {number}: {status or ('PASS' if passed else 'FAIL')} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_dataset(n=400, d=2, seed=0, shift=1.0):
    """Four Gaussian cells; the s=1 cells sit ``shift`` above the s=0 cells."""
    rng = np.random.default_rng(seed)
    u = rng.integers(0, 2, n)
    s = rng.integers(0, 2, n)
    X = rng.normal(size=(n, d)) + shift * s[:, None] + 0.5 * u[:, None]
    return Dataset(X, s, u)


@pytest.fixture
def small_data():
    return make_dataset()


@pytest.fixture
def archive_data():
    return make_dataset(n=2000, seed=1)
