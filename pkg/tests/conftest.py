import numpy as np
import pytest
from hypothesis import settings

from layerqnn.model import ParamSet

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_params(rng):
    return [ParamSet.random(rng) for _ in range(3)]


ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Log one PASS/FAIL line for an acceptance criterion and assert it."""

    def record(number, name, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number:2d}  {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
