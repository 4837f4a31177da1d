import numpy as np
import pytest

from kalls.geometry import Pool
from kalls.problems import linear_1d, uniform_problem


@pytest.fixture
def linear():
    return linear_1d()


@pytest.fixture
def always_one():
    return uniform_problem(lambda X: np.ones(len(X)), name="eta-one")


@pytest.fixture
def coin():
    return uniform_problem(lambda X: np.full(len(X), 0.5), name="eta-half")


@pytest.fixture
def line_pool():
    def make(*coords):
        return Pool(np.asarray(coords, dtype=float).reshape(-1, 1))

    return make


_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record the verdict of one acceptance criterion for the end-of-run summary."""

    def report(number: int, passed: bool, detail: str) -> None:
        _ACCEPTANCE[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")

    return report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, 11):
        if number in _ACCEPTANCE:
            passed, detail = _ACCEPTANCE[number]
            terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {number:>2}: NOT RUN")
