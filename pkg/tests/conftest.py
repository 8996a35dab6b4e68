import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

from toprank.oracle import uniform_model  # noqa: E402

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def unif():
    return uniform_model()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@st.composite
def labelled_sample(draw, min_size=2, max_size=40, distinct=True):
    """Integer-valued scores (so ties are controllable) with both classes present."""
    n = draw(st.integers(min_size, max_size))
    if distinct:
        scores = draw(st.lists(st.integers(-500, 500), min_size=n, max_size=n, unique=True))
    else:
        scores = draw(st.lists(st.integers(-5, 5), min_size=n, max_size=n))
    labels = draw(st.lists(st.sampled_from([-1, 1]), min_size=n, max_size=n))
    labels[0], labels[-1] = 1, -1
    return [float(s) for s in scores], labels


rates = st.sampled_from([0.05, 0.1, 0.2, 0.25, 0.3, 0.5, 0.7, 0.9])


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
