import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_hurwitz(rng, n):
    """Random Hurwitz matrix: similarity transform of a stable block-diagonal form."""
    eig = -rng.uniform(0.2, 5.0, n)
    T = rng.normal(size=(n, n)) + n * np.eye(n)
    return T @ np.diag(eig) @ np.linalg.inv(T)


# (num, den) in ascending powers of s, and whether the function is SPR
SPR_FAMILY = [
    ([1.0], [1.0, 1.0], True),
    ([2.0], [3.0, 1.0], True),
    ([1.0, 1.0], [1.0, 3.0, 1.0], True),
    ([0.5, 1.0], [2.0, 3.0, 1.0], True),
    ([2.0, 1.0], [3.0, 4.0, 1.0], True),
    ([1.0], [1.0, 2.0, 1.0], False),
    ([-1.0], [1.0, 1.0], False),
    ([3.0, 1.0], [1.0, 1.0, 1.0], False),
    ([-1.0, 1.0], [1.0, 2.0, 1.0], False),
    ([5.0, 1.0], [4.0, 1.0, 1.0], False),
]


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        terminalreporter.write_line(results[k])
