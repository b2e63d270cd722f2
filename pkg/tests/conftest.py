import numpy as np
import pytest

from csie2d.geom import CurveSpec, discretize


@pytest.fixture(scope="session")
def circle64():
    return discretize(CurveSpec.circle(0.5), 64)


@pytest.fixture(scope="session")
def ellipse96():
    return discretize(CurveSpec.ellipse(0.8, 0.4), 96)


@pytest.fixture(scope="session")
def star160():
    return discretize(CurveSpec.hexagram(), 160)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance criteria report one line each; collected here and printed in the
# terminal summary so they show up without -s
_CRITERIA = {}


@pytest.fixture
def criterion():
    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        _CRITERIA[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
