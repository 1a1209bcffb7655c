import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from srfb.core import Box, ContractError, ParameterError
from srfb.games import eval_pseudogradient, make_quadratic_game
from srfb.sampling import (
    SA,
    VR,
    BatchSchedule,
    NoiseModel,
    StochasticOracle,
    batch_size,
    fit_loglog_slope,
    sample_estimate,
    stochastic_error,
    variance_profile,
)

META_SEEDS = [11, 22, 33, 44, 55]
X = np.array([0.5, -0.3, 0.2, 0.9])


@pytest.fixture(scope="module")
def game4():
    Q = np.array([[2.0, 1.0, 0, 0], [-1.0, 2.0, 0.5, 0], [0, -0.5, 1.5, 0], [0, 0, 0, 1.0]])
    return make_quadratic_game(Q, [0.1, 0.2, -0.3, 0.0], Box([-1] * 4, [1] * 4), (2, 2))


class TestSchedule:
    @pytest.mark.parametrize("b, k0, a, k, n", [(1, 0, 1, 2, 4), (2, 1, 1, 3, 32), (1, 0, 0.5, 4, 8)])
    def test_formula(self, b, k0, a, k, n):
        assert batch_size(BatchSchedule(b, k0, a), k) == n

    def test_cap(self):
        assert BatchSchedule(1, 1, 1, cap=50).size(100) == 50

    @pytest.mark.parametrize("kw", [{"b": 0}, {"k0": -1}, {"a": 0}, {"cap": 0}])
    def test_invalid(self, kw):
        with pytest.raises(ParameterError):
            BatchSchedule(**kw)

    def test_negative_k(self):
        with pytest.raises(ContractError):
            BatchSchedule().size(-1)

    @given(st.floats(0.01, 5), st.floats(0, 5), st.floats(0.01, 2), st.integers(0, 500))
    def test_nondecreasing_and_admissible(self, b, k0, a, k):
        s = BatchSchedule(b, k0, a, cap=10**9)
        assert 1 <= s.size(k) <= s.size(k + 1)
        assert s.size(k) >= b * (k + k0) ** (a + 1) * (1 - 1e-12)


class TestOracle:
    def test_zero_noise_exact(self, game4):
        for mode in (SA(5), VR(BatchSchedule())):
            o = StochasticOracle(game4, NoiseModel(sigma=0.0), mode, seed=1)
            np.testing.assert_array_equal(sample_estimate(o, X, 3), eval_pseudogradient(game4, X))

    def test_determinism(self, game4):
        def stream(seed):
            o = StochasticOracle(game4, NoiseModel(sigma=1.0), VR(BatchSchedule()), seed=seed)
            return [o.query(X, k) for k in range(6)]
        for a, b in zip(stream(5), stream(5)):
            np.testing.assert_array_equal(a, b)
        assert not np.array_equal(stream(5)[0], stream(6)[0])

    def test_counters_sa(self, game4):
        o = StochasticOracle(game4, NoiseModel(sigma=0.3), SA(7), seed=0)
        for k in range(25):
            o.query(X, k)
        assert (o.samples_drawn, o.evaluations) == (175, 25)

    def test_counters_vr(self, game4):
        s = BatchSchedule(1, 1, 1)
        o = StochasticOracle(game4, NoiseModel(sigma=0.3), VR(s), seed=0)
        for k in range(10):
            o.query(X, k)
        assert o.samples_drawn == sum(s.size(k) for k in range(10))
        assert o.evaluations == 10

    def test_large_batch_accuracy(self, game4):
        # 3 sigma / sqrt(N) = 0.003 per component at N = 10^6
        o = StochasticOracle(game4, NoiseModel(sigma=1.0), SA(10**6), seed=2)
        err = stochastic_error(o.query(X, 0), eval_pseudogradient(game4, X))
        assert np.abs(err).max() < 0.01

    def test_stochastic_error(self):
        np.testing.assert_array_equal(stochastic_error([1, 2], [1, 1]), [0, 1])
        np.testing.assert_array_equal(stochastic_error([1, 2], [1, 2]), [0, 0])
        with pytest.raises(ContractError):
            stochastic_error([1, 2], [1, 2, 3])

    def test_invalid_noise(self):
        with pytest.raises(ParameterError):
            NoiseModel(sigma=-1)
        with pytest.raises(ParameterError):
            NoiseModel(kind="cauchy", sigma=1)
        with pytest.raises(ParameterError):
            SA(0)


class TestVarianceProfile:
    def test_requires_vr(self, game4):
        with pytest.raises(ParameterError):
            variance_profile(StochasticOracle(game4, NoiseModel(sigma=1), SA(1)), X, [0], 30)

    def test_requires_reps(self, game4):
        o = StochasticOracle(game4, NoiseModel(sigma=1), VR(BatchSchedule()))
        with pytest.raises(ParameterError):
            variance_profile(o, X, [0], 10)

    def test_zero_noise(self, game4):
        o = StochasticOracle(game4, NoiseModel(sigma=0), VR(BatchSchedule()))
        assert all(m == 0 for _, m in variance_profile(o, X, [0, 1, 2], 30))

    def test_slope_fit_exact(self):
        pairs = [(n, 3.0 / n) for n in (1, 4, 16, 64)]
        slope, c = fit_loglog_slope(pairs)
        assert slope == pytest.approx(-1, abs=1e-12)
        assert np.exp(c) == pytest.approx(3.0, rel=1e-12)


@pytest.mark.parametrize("meta", META_SEEDS)
class TestStatisticalContracts:
    """Moment conditions of the noise, checked at fixed confidence per meta-seed."""

    def test_zero_mean(self, game4, meta):
        sigma = 1.0
        o = StochasticOracle(game4, NoiseModel(sigma=sigma), SA(1), seed=meta)
        exact = eval_pseudogradient(game4, X)
        E = np.array([o.query(X, k) - exact for k in range(10_000)])
        assert np.all(np.abs(E.mean(0)) <= 4 * sigma / 100)

    def test_bounded_variance(self, game4, meta):
        sigma = 0.7
        o = StochasticOracle(game4, NoiseModel(sigma=sigma), SA(1), seed=meta)
        exact = eval_pseudogradient(game4, X)
        E = np.array([o.query(X, k) - exact for k in range(5_000)])
        assert (E**2).sum(1).mean() <= sigma**2 * 4 * 1.2

    def test_multiplicative_zero_mean(self, game4, meta):
        o = StochasticOracle(game4, NoiseModel("multiplicative_gaussian", 0.5), SA(1), seed=meta)
        exact = eval_pseudogradient(game4, X)
        E = np.array([o.query(X, k) - exact for k in range(10_000)])
        sd = 0.5 * np.abs(exact)
        assert np.all(np.abs(E.mean(0)) <= 4 * sd / 100 + 1e-15)

    def test_variance_reduction(self, game4, meta):
        sigma = 1.0
        o = StochasticOracle(game4, NoiseModel(sigma=sigma), VR(BatchSchedule(1, 0, 1)), seed=meta)
        prof = variance_profile(o, X, [1, 2, 4, 8, 16, 32], 100)
        assert [n for n, _ in prof] == [1, 4, 16, 64, 256, 1024]
        slope, _ = fit_loglog_slope(prof)
        assert abs(slope + 1) <= 0.15
        C = np.array([m * n / sigma**2 for n, m in prof])
        # n sigma^2 / N with n = 4: the fitted constant is 4 and stable within 20%
        assert np.all(np.abs(C / np.median(C) - 1) <= 0.2)
        np.testing.assert_allclose(np.median(C), 4.0, rtol=0.2)
