import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_simplex(rng, d, scale=1.0):
    """d+1 Gaussian points, redrawn until comfortably non-degenerate."""
    while True:
        S = scale * rng.standard_normal((d + 1, d))
        s = np.linalg.svd((S[1:] - S[0]).T, compute_uv=False)
        if s[-1] > 1e-3 * s[0]:
            return S


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
