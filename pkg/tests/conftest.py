"""Shared fixtures and data builders for the test suite."""

import numpy as np
import pytest

from dpsco import LabeledDataset, approx_budget, pure_budget, squared_linear_model

# one line per acceptance criterion, replayed in the terminal summary so the
# verdicts stay visible under pytest's default output capture
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_regression(n, d, seed=0, sigma=0.1, w_star=None):
    """Row-normalized Gaussian design with linear labels plus noise."""
    rng = np.random.default_rng(seed)
    X = rng.normal(0.0, 1.0, (n, d))
    X /= np.maximum(1.0, np.linalg.norm(X, axis=1))[:, None]
    if w_star is None:
        w_star = rng.normal(0.0, 0.1, d)
    y = X @ w_star + sigma * rng.normal(0.0, 1.0, n)
    return LabeledDataset(X, y), np.asarray(w_star, dtype=float)


@pytest.fixture
def small_regression():
    return make_regression(512, 5, seed=7)


@pytest.fixture
def approx():
    return approx_budget(1.0, 1e-5)


@pytest.fixture
def pure():
    return pure_budget(1.0)


@pytest.fixture
def sq_model():
    # L covers |2 (<w,x> - y) x| for ||x|| <= 1, |y| <= 1 and an l1 ball of
    # radius 1; smoothness of the squared loss with ||x|| <= 1 is 2
    return squared_linear_model(lipschitz=4.0, smoothness=2.0)
