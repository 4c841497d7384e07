import numpy as np
import pytest

from chaoscontrol.torus import HilbertSpec, make_random


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_states(N, count, offset=0.0, start=0):
    spec = HilbertSpec(N, offset)
    return [make_random(spec, start + i) for i in range(count)]


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
