"""Stochastic pseudogradient oracles.

Noise is modelled as a per-sample perturbation of the exact field.  A query
draws a mini-batch, either fixed (``SA``) or growing with the iteration
counter (``VR``), and returns the sample mean.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import kernels
from .core import ContractError, ParameterError, as_vector
from .games import Game, eval_pseudogradient

__all__ = [
    "RNG_VERSION",
    "NoiseModel",
    "BatchSchedule",
    "SA",
    "VR",
    "StochasticOracle",
    "batch_size",
    "sample_estimate",
    "stochastic_error",
    "variance_profile",
    "fit_loglog_slope",
    "make_rng",
]

# Bump whenever the way random numbers are drawn changes; stored in manifests.
RNG_VERSION = "numpy-pcg64-seedsequence/1"

_CHUNK_ROWS = 1 << 15
NOISE_KINDS = ("additive_gaussian", "multiplicative_gaussian")


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "additive_gaussian"
    sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ParameterError(f"unknown noise kind {self.kind!r}")
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise ParameterError("noise sigma must be finite and >= 0")

    @property
    def multiplicative(self) -> bool:
        return self.kind == "multiplicative_gaussian"


@dataclass(frozen=True)
class BatchSchedule:
    """N_k = min(cap, ceil(b (k + k0)^(a + 1)))."""

    b: float = 1.0
    k0: float = 1.0
    a: float = 1.0
    cap: int = 1_000_000

    def __post_init__(self):
        if not self.b > 0:
            raise ParameterError("schedule.b must be > 0")
        if not self.k0 >= 0:
            raise ParameterError("schedule.k0 must be >= 0")
        if not self.a > 0:
            raise ParameterError("schedule.a must be > 0")
        if int(self.cap) < 1:
            raise ParameterError("schedule.cap must be >= 1")

    def size(self, k: int) -> int:
        if k < 0:
            raise ContractError("iteration index must be >= 0")
        raw = math.ceil(self.b * (k + self.k0) ** (self.a + 1))
        return int(min(self.cap, max(1, raw)))


def batch_size(schedule: BatchSchedule, k: int) -> int:
    return schedule.size(k)


@dataclass(frozen=True)
class SA:
    batch: int = 1

    def __post_init__(self):
        if int(self.batch) < 1:
            raise ParameterError("SA batch must be >= 1")

    def size(self, k: int) -> int:
        return int(self.batch)


@dataclass(frozen=True)
class VR:
    schedule: BatchSchedule

    def size(self, k: int) -> int:
        return self.schedule.size(k)


SamplingMode = Union[SA, VR]


class StochasticOracle:
    """Seeded mini-batch estimator of a game's pseudogradient.

    Single-owner: the counters and generator are mutated by every query.
    Besides the counters it keeps running statistics of the per-sample norms
    ``||F_hat(x, xi)||``, used to measure a bound on the estimator.
    """

    def __init__(self, game: Game, noise: NoiseModel, mode: SamplingMode, seed=0):
        self.game = game
        self.noise = noise
        self.mode = mode
        self.seed = seed
        self.rng = make_rng(seed)
        self.samples_drawn = 0
        self.evaluations = 0
        self.norm_max = 0.0
        self.norm_sum = 0.0
        self.norm_sumsq = 0.0

    def batch_for(self, k: int) -> int:
        return self.mode.size(k)

    def query(self, x, k: int) -> np.ndarray:
        exact = eval_pseudogradient(self.game, x)
        n_samples = self.batch_for(k)
        sigma = self.noise.sigma
        if sigma == 0.0:
            est = exact
            nrm = float(np.linalg.norm(exact))
            self.norm_max = max(self.norm_max, nrm)
            self.norm_sum += n_samples * nrm
            self.norm_sumsq += n_samples * nrm * nrm
        else:
            est = np.zeros_like(exact)
            left = n_samples
            while left:
                m = min(left, _CHUNK_ROWS)
                z = self.rng.standard_normal((m, exact.size))
                mean, mx, s1, s2 = kernels.batch_moments(exact, z, self.noise.multiplicative, sigma)
                est += mean * (m / n_samples)
                self.norm_max = max(self.norm_max, float(mx))
                self.norm_sum += float(s1)
                self.norm_sumsq += float(s2)
                left -= m
        self.samples_drawn += n_samples
        self.evaluations += 1
        return est

    def norm_stats(self):
        """(max, mean, std) of the per-sample estimator norms seen so far."""
        n = self.samples_drawn
        if n == 0:
            return 0.0, 0.0, 0.0
        mean = self.norm_sum / n
        var = max(self.norm_sumsq / n - mean * mean, 0.0)
        if n > 1:
            var *= n / (n - 1)
        return self.norm_max, mean, math.sqrt(var)

    def __repr__(self):
        return (f"StochasticOracle({self.game.name}, {self.noise}, {self.mode}, seed={self.seed}, "
                f"samples={self.samples_drawn}, evals={self.evaluations})")


def sample_estimate(oracle: StochasticOracle, x, k: int) -> np.ndarray:
    """Mini-batch mean of perturbed pseudogradient samples at ``x``."""
    return oracle.query(x, k)


def stochastic_error(estimate, exact) -> np.ndarray:
    est, ex = as_vector(estimate), as_vector(exact)
    if est.shape != ex.shape:
        raise ContractError("estimate and exact value differ in dimension")
    return est - ex


def variance_profile(oracle: StochasticOracle, x, ks, reps: int):
    """Empirical E||eps_k||^2 at each iteration index in ``ks``.

    Returns a list of ``(N_k, mse)`` pairs.
    """
    if not isinstance(oracle.mode, VR):
        raise ParameterError("variance_profile needs a VR-mode oracle")
    if reps < 30:
        raise ParameterError("variance_profile needs reps >= 30")
    exact = eval_pseudogradient(oracle.game, x)
    out = []
    for k in ks:
        errs = [stochastic_error(oracle.query(x, k), exact) for _ in range(reps)]
        mse = float(np.mean([e @ e for e in errs]))
        out.append((oracle.batch_for(k), mse))
    return out


def fit_loglog_slope(pairs) -> tuple:
    """Least-squares fit of log(mse) = slope * log(N) + c; returns (slope, c)."""
    N = np.array([p[0] for p in pairs], dtype=float)
    mse = np.array([p[1] for p in pairs], dtype=float)
    slope, c = np.polyfit(np.log(N), np.log(mse), 1)
    return float(slope), float(c)
