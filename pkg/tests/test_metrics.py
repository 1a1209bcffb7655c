import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srfb.core import Ball, Box, ContractError, ParameterError
from srfb.games import make_bilinear_saddle, make_quadratic_game, random_quadratic_matrix
from srfb.metrics import (
    RunRecord,
    gap_estimate,
    noise_second_moment,
    residual,
    summarize,
    averaged_gap_bound,
    averaging_bound_constant,
)
from srfb.sampling import NoiseModel
from tests.test_games import zoo


def record(values, ks=None):
    r = RunRecord()
    ks = range(len(values)) if ks is None else ks
    for k, v in zip(ks, values):
        r.append(k=k, batch_size=1, samples_cum=k, evals_cum=k, residual=v,
                 dist_to_solution=np.nan, gap_estimate=np.nan, wall_ms=0.0)
    r.finalize()
    return r


class TestResidual:
    def test_solution(self, rotation_game):
        assert residual([0, 0], rotation_game, 0.2) == 0.0

    def test_hand(self, scalar_pair_game):
        assert residual([0.5, 0.0], scalar_pair_game, 0.2) == pytest.approx(0.1, abs=1e-15)

    def test_corner_outward(self):
        g = make_quadratic_game(np.eye(2), [-5.0, -5.0], Box([-1, -1], [1, 1]), (1, 1))
        np.testing.assert_allclose(g.known_solution, [1, 1])
        assert residual([1, 1], g, 0.2) == 0.0
        # grid VI check at the corner
        t = np.linspace(-1, 1, 201)
        Y = np.stack(np.meshgrid(t, t), -1).reshape(-1, 2)
        assert ((Y - 1) @ np.array([-4.0, -4.0])).min() >= 0

    def test_bad_lambda(self, rotation_game):
        with pytest.raises(ParameterError):
            residual([0, 0], rotation_game, 0.0)

    def test_continuity(self, rng):
        g = make_quadratic_game(random_quadratic_matrix(4, 1.0, 1.0, 2), [1, 0, -1, 0.5],
                                Box([-1] * 4, [1] * 4), (2, 2))
        for _ in range(100):
            x = rng.uniform(-1, 1, 4)
            d = rng.normal(size=4)
            d *= 1e-6 / np.linalg.norm(d)
            y = np.clip(x + d, -1, 1)
            bound = g.lipschitz_constant * 2 * 1e-6 * 10
            assert abs(residual(x, g, 0.3) - residual(y, g, 0.3)) <= bound


class TestGap:
    def test_scalar_quarter(self, scalar_pair_game):
        # max_y y(1 - y) - z^2 over the square: 1/4 at (1/2, 0)
        est = gap_estimate([1.0, 0.0], scalar_pair_game, 1024)
        assert est.value == pytest.approx(0.25, abs=1e-9)
        np.testing.assert_allclose(est.argmax, [0.5, 0.0], atol=1e-4)
        assert est.budget == 1024

    def test_scalar_zero(self, scalar_pair_game):
        assert gap_estimate([0.0, 0.0], scalar_pair_game, 256).value == 0.0

    @pytest.mark.parametrize("idx", range(5))
    def test_vanishes_at_solution(self, idx):
        g = zoo()[idx]
        assert gap_estimate(g.known_solution, g, 1024).value <= 1e-6

    def test_rotation_closed_form(self, rotation_game):
        # <F(y), x - y> = <Jy, x> on the rotation field, so err(x) = 2 |x|
        x = np.array([0.6, -0.8])
        assert gap_estimate(x, rotation_game, 2048).value == pytest.approx(2.0, abs=1e-3)

    def test_zero_budget(self, rotation_game):
        with pytest.raises(ParameterError):
            gap_estimate([0, 0], rotation_game, 0)

    def test_high_dim_uses_sobol(self):
        g = make_bilinear_saddle(np.eye(2), Box([-1] * 4, [1] * 4))
        x = np.array([0.5, 0.0, 0.0, 0.5])
        # err(x) = max <A^T y_d, x_g> - <A y_g, x_d> = |x_g|_1 + |x_d|_1 on the cube
        assert gap_estimate(x, g, 4096).value == pytest.approx(1.0, abs=1e-3)

    @settings(max_examples=15, deadline=None)
    @given(st.floats(-1, 1), st.floats(-1, 1), st.integers(2, 9))
    def test_monotone_in_budget(self, a, b, p):
        g = make_quadratic_game([[1.0, 2.0], [-2.0, 0.5]], [0.2, -0.1], Box([-1, -1], [1, 1]), (1, 1))
        lo = gap_estimate([a, b], g, 2**p).value
        hi = gap_estimate([a, b], g, 2 ** (p + 1)).value
        assert hi >= lo - 1e-15


class TestSummarize:
    def test_single(self):
        s = summarize([record([0.5, 0.25])])
        np.testing.assert_array_equal(s["mean"], [0.5, 0.25])
        np.testing.assert_array_equal(s["variance"], [0, 0])
        assert s["floored"].all()
        np.testing.assert_allclose(s["ratio"], [0.5e12, 0.25e12])

    def test_two(self):
        s = summarize([record([1.0]), record([3.0])])
        assert (s["mean"][0], s["variance"][0], s["ratio"][0]) == (2.0, 2.0, 1.0)
        assert (s["min"][0], s["max"][0]) == (1.0, 3.0)

    def test_identical(self):
        s = summarize([record([1.0, 2.0, 3.0])] * 4)
        np.testing.assert_array_equal(s["variance"], 0)

    def test_errors(self):
        with pytest.raises(ContractError):
            summarize([])
        with pytest.raises(ContractError):
            summarize([record([1.0, 2.0]), record([1.0, 2.0], ks=[0, 2])])

    def test_counters_non_decreasing(self, rotation_game):
        from srfb.sampling import SA, NoiseModel, StochasticOracle
        from srfb.solvers import SolverConfig, run_solver

        o = StochasticOracle(rotation_game, NoiseModel(sigma=0.1), SA(2), seed=0)
        rec = run_solver(rotation_game, o, SolverConfig("EG", lam=0.1, max_iters=30), x0=[1, 0])
        for c in ("k", "samples_cum", "evals_cum"):
            assert np.all(np.diff(rec[c]) >= 0)

    def test_first_reaching(self):
        r = record([3.0, 2.0, 0.5, 0.1])
        assert r.first_reaching("residual", 1.0) == 2
        assert r.first_reaching("residual", 0.01) is None


class TestBound:
    def test_constant(self):
        assert averaging_bound_constant(0.5) == 3.5
        assert averaging_bound_constant(0.0) == 2.0
        with pytest.raises(ParameterError):
            averaging_bound_constant(1.0)

    def test_bound(self):
        # c R / (lam K) + (2 B^2 + s^2) lam
        assert averaged_gap_bound(0.5, 4.0, 0.05, 100, 1.0, 0.25) == pytest.approx(3.5 * 4 / 5 + 2.25 * 0.05)

    def test_noise_moment(self):
        assert noise_second_moment(NoiseModel(sigma=0.5), 2) == 0.5
        assert noise_second_moment(NoiseModel(sigma=0.5), 2, batch=5) == 0.1
        with pytest.raises(ParameterError):
            noise_second_moment(NoiseModel("multiplicative_gaussian", 0.5), 2)

    def test_ball_diameter_R(self):
        assert Ball([0, 0], 2.0).diameter() == 4.0
