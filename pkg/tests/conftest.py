import warnings

import numpy as np
import pytest

from srfb.core import Ball, Box


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def rotation_game():
    """Bilinear 1-v-1 game with A = 1 on the disk of radius 2: F(t, p) = (p, -t)."""
    from srfb.games import make_bilinear_saddle

    return make_bilinear_saddle([[1.0]], Ball([0.0, 0.0], 2.0))


@pytest.fixture
def scalar_pair_game():
    """Two decoupled copies of the scalar problem F(x) = x on [-1, 1]."""
    from srfb.games import make_quadratic_game

    return make_quadratic_game(np.eye(2), np.zeros(2), Box([-1, -1], [1, 1]), (1, 1))


@pytest.fixture(autouse=True)
def _quiet_relaxation_warnings():
    from srfb.solvers import RelaxationRangeWarning

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RelaxationRangeWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    try:
        from tests.test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[n])
