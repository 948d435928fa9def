import numpy as np
import pytest
from hypothesis import settings

from maxweight.instances import random_instance, worked_instance
from maxweight.markov import MarkovChainSpec

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def worked():
    return worked_instance()


@pytest.fixture(scope="session")
def corpus():
    """Worked instance followed by 25 seeded random instances."""
    return [worked_instance()] + [random_instance(s) for s in range(25)]


@pytest.fixture
def two_state():
    return MarkovChainSpec(("a", "b"), np.array([[0.7, 0.3], [0.6, 0.4]]))


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Append-only list of one-line acceptance verdicts, echoed in the summary."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
