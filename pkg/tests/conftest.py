import numpy as np
import pytest
from hypothesis import strategies as st

from obsdiam import mmspace


@pytest.fixture
def T():
    return mmspace.generate("k_regular", 2)


@pytest.fixture
def path3():
    d = [[0, 1, 2], [1, 0, 1], [2, 1, 0]]
    return mmspace.new_finite("abc", d, np.full(3, 1 / 3))


@st.composite
def spaces(draw, max_points=5):
    k = draw(st.integers(1, max_points))
    seed = draw(st.integers(0, 10_000))
    return mmspace.generate("random", k, seed=seed)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
