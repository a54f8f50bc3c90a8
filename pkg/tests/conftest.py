import numpy as np
import pytest
from hypothesis import settings

from lralp.mdp_core import Mdp, random_mdp

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_mdp(rng):
    return random_mdp(6, 3, 0.9, rng)


def two_state_swap(discount=0.5):
    P = np.array([[[0.0, 1.0], [1.0, 0.0]]])
    g = np.array([[1.0, 0.0]])
    return Mdp(P, g, discount)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
