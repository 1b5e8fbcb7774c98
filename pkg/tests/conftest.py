import numpy as np
import pytest

from bigraphgan import tensor as T


@pytest.fixture
def f64():
    with T.precision("float64"):
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def uniform(rng, shape, requires_grad=True):
    """Double-precision tensor with entries uniform in [-1, 1]."""
    return T.Tensor(rng.uniform(-1.0, 1.0, shape), requires_grad=requires_grad, dtype=np.float64)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = {}


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
