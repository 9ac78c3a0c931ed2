import numpy as np
import pytest

from bandit_newton import geometry

_CRITERIA = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def unit_disk():
    return geometry.positioned(geometry.Ball(1.0, dim=2), epsilon=0.1)


@pytest.fixture
def criterion(capsys):
    """Record (and print) one acceptance line, then assert it."""

    def record(number, title, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {title}: {detail}"
        _CRITERIA[number] = line
        with capsys.disabled():
            print("\n" + line)
        assert passed, line

    return record


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running experiment")


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
