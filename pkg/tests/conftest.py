import numpy as np
import pytest

from mlvr.data import SparseDataset
from mlvr.synthetic import make_logistic

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def toy():
    # x1=(1,0) y=+1, x2=(0,1) y=-1
    return SparseDataset.from_dense(np.eye(2), np.array([1.0, -1.0]), name="toy")


@pytest.fixture
def small():
    return make_logistic(60, 6, scale_span=10.0, seed=3)


def random_dataset(rng, n=None, d=None, density=0.7):
    n = n or int(rng.integers(2, 21))
    d = d or int(rng.integers(1, 6))
    X = rng.standard_normal((n, d)) * (rng.random((n, d)) < density)
    y = rng.choice([-1.0, 1.0], size=n)
    return SparseDataset.from_dense(X, y)
