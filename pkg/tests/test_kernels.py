import os
import subprocess
import sys

import numpy as np
import pytest

from srfb import kernels
from srfb._jit import USE_NUMBA

needs_numba = pytest.mark.skipif(not USE_NUMBA, reason="numba path disabled")


def _inputs(name, rng):
    n = 7
    if name == "clip_box":
        return (rng.normal(scale=3, size=n), -np.ones(n), np.ones(n))
    if name == "project_ball":
        return (rng.normal(scale=3, size=n), rng.normal(size=n), 1.5)
    if name == "relax":
        return (rng.normal(size=n), rng.normal(size=n), 0.7)
    if name == "batch_moments":
        return (rng.normal(size=n), rng.standard_normal((500, n)), False, 0.8)
    if name == "adam_update":
        return (rng.normal(size=n), rng.normal(size=n), rng.random(n), rng.normal(size=n),
                0.5, 0.9, 3, 0.1, 1e-8)
    if name == "gap_max":
        return (rng.normal(size=(300, n)), rng.normal(size=(300, n)), rng.normal(size=n))
    raise KeyError(name)


@needs_numba
@pytest.mark.parametrize("name", sorted(kernels.PAIRS))
def test_paths_agree(name):
    nb, ref = kernels.PAIRS[name]
    rng = np.random.default_rng(3)
    for _ in range(5):
        args = _inputs(name, rng)
        a, b = nb(*args), ref(*args)
        a = a if isinstance(a, tuple) else (a,)
        b = b if isinstance(b, tuple) else (b,)
        for u, v in zip(a, b):
            np.testing.assert_allclose(u, v, rtol=1e-12, atol=1e-12)


@needs_numba
def test_multiplicative_moments_agree():
    nb, ref = kernels.PAIRS["batch_moments"]
    rng = np.random.default_rng(4)
    args = (rng.normal(size=3), rng.standard_normal((200, 3)), True, 0.4)
    for u, v in zip(nb(*args), ref(*args)):
        np.testing.assert_allclose(u, v, rtol=1e-12, atol=1e-12)


def test_ball_inside_untouched():
    x = np.array([0.1, 0.2])
    np.testing.assert_array_equal(kernels.project_ball(x, np.zeros(2), 1.0), x)


def test_fallback_flag_selects_numpy():
    env = dict(os.environ, SRFB_DISABLE_JIT="1")
    out = subprocess.run(
        [sys.executable, "-c", "import srfb, srfb.kernels as k; print(srfb.backend(), k.clip_box is k.clip_box_np)"],
        capture_output=True, text=True, env=env, check=True,
    )
    assert out.stdout.split() == ["numpy", "True"]
