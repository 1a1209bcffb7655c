"""Projected first-order solvers for monotone (stochastic) variational inequalities.

Algorithms: plain forward-backward (FB), stochastic relaxed forward-backward
(SRFB), its averaged variant (aSRFB), extragradient (EG), Adam and Relaxed
Adam.  All of them end every update with a projection onto the feasible set.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .core import ParameterError, as_vector, relax_combine
from .games import Game
from .metrics import RunRecord, gap_estimate, residual
from .sampling import StochasticOracle

__all__ = [
    "ALGORITHMS",
    "GOLDEN_DELTA",
    "RelaxationRangeWarning",
    "AdamParams",
    "Averaging",
    "SolverConfig",
    "SolverState",
    "AverageState",
    "default_stepsize",
    "init_state",
    "fb_step",
    "srfb_step",
    "eg_step",
    "adam_step",
    "relaxed_adam_step",
    "update_average",
    "run_solver",
    "relaxation_identity_errors",
]

ALGORITHMS = ("FB", "SRFB", "aSRFB", "EG", "Adam", "RelaxedAdam")
# Smallest relaxation admitted by the SRFB step-size analysis, 2 / (1 + sqrt 5).
GOLDEN_DELTA = 2.0 / (1.0 + math.sqrt(5.0))


class RelaxationRangeWarning(UserWarning):
    """Relaxation parameter below the range covered by the convergence theory."""


def default_stepsize(ell: float, delta: float) -> float:
    """Largest admissible constant step 1 / (2 delta (2 ell + 1))."""
    if not ell > 0:
        raise ParameterError("Lipschitz constant must be > 0")
    if not 0 < delta <= 1:
        raise ParameterError("default step size needs delta in (0, 1]; set lambda explicitly")
    return 1.0 / (2.0 * delta * (2.0 * ell + 1.0))


@dataclass(frozen=True)
class AdamParams:
    beta1: float = 0.5
    beta2: float = 0.9
    alpha: float = 1e-3
    epsilon_reg: float = 1e-8

    def __post_init__(self):
        for name in ("beta1", "beta2"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ParameterError(f"adam.{name} must lie in [0, 1)")
        if not self.alpha > 0:
            raise ParameterError("adam.alpha must be > 0")
        if not self.epsilon_reg > 0:
            raise ParameterError("adam.epsilon_reg must be > 0")


@dataclass(frozen=True)
class Averaging:
    """Weights for the running average of the iterates.

    ``uniform`` weighs iterate k by the step size, ``geometric`` by
    ``ratio**k``, ``exponential`` is the moving average with constant
    coefficient ``beta``, ``weighted`` takes explicit ``weights``.
    """

    kind: str = "none"
    ratio: float = 1.01
    beta: float = 0.01
    weights: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("none", "uniform", "geometric", "exponential", "weighted"):
            raise ParameterError(f"unknown averaging kind {self.kind!r}")
        if self.kind == "geometric" and not self.ratio > 0:
            raise ParameterError("geometric averaging ratio must be > 0")
        if self.kind == "exponential" and not 0 < self.beta <= 1:
            raise ParameterError("exponential averaging beta must lie in (0, 1]")
        if self.kind == "weighted":
            if not self.weights or any(w <= 0 for w in self.weights):
                raise ParameterError("weighted averaging needs positive weights")
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    @property
    def enabled(self) -> bool:
        return self.kind != "none"


@dataclass(frozen=True)
class SolverConfig:
    algorithm: str
    lam: Optional[float] = None
    delta: float = 0.0
    adam: AdamParams = field(default_factory=AdamParams)
    averaging: Averaging = field(default_factory=Averaging)
    max_iters: int = 1000

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ParameterError(f"unknown algorithm {self.algorithm!r}")
        if not 0.0 <= self.delta < 1.0:
            raise ParameterError(f"delta={self.delta} outside [0, 1)")
        if self.algorithm in ("SRFB", "RelaxedAdam") and self.delta < GOLDEN_DELTA:
            warnings.warn(
                f"{self.algorithm} with delta={self.delta} < {GOLDEN_DELTA:.6f} is outside the analysed range",
                RelaxationRangeWarning,
                stacklevel=3,
            )
        if self.algorithm in ("FB", "SRFB", "aSRFB", "EG"):
            if self.lam is None or not self.lam > 0:
                raise ParameterError("step size lam must be > 0")
        if int(self.max_iters) < 0:
            raise ParameterError("max_iters must be >= 0")
        if self.algorithm == "aSRFB" and not self.averaging.enabled:
            object.__setattr__(self, "averaging", Averaging("uniform"))

    @property
    def relaxed(self) -> bool:
        return self.algorithm in ("SRFB", "aSRFB", "RelaxedAdam")


@dataclass
class AverageState:
    X: Optional[np.ndarray] = None
    S: float = 0.0


def update_average(avg: AverageState, x, weight: float) -> AverageState:
    """Online weighted mean: S += w, X += (w / S)(x - X)."""
    if not weight > 0:
        raise ParameterError("averaging weight must be > 0")
    x = as_vector(x)
    S = avg.S + weight
    if avg.X is None:
        return AverageState(x.copy(), S)
    return AverageState(avg.X + (weight / S) * (x - avg.X), S)


@dataclass
class SolverState:
    x: np.ndarray
    x_bar_prev: np.ndarray
    k: int = 0
    eg_midpoint: Optional[np.ndarray] = None
    adam_z: Optional[np.ndarray] = None
    adam_y: Optional[np.ndarray] = None
    adam_t: int = 0
    average: Optional[AverageState] = None
    x_bar: Optional[np.ndarray] = None


def init_state(x0, averaging: bool = False) -> SolverState:
    x0 = np.array(as_vector(x0), dtype=float)
    n = x0.size
    return SolverState(
        x=x0,
        x_bar_prev=x0.copy(),
        adam_z=np.zeros(n),
        adam_y=np.zeros(n),
        average=AverageState() if averaging else None,
    )


def fb_step(state: SolverState, oracle: StochasticOracle, feasible_set, lam: float,
            k: Optional[int] = None) -> SolverState:
    """x+ = P(x - lam F_hat(x))."""
    k = state.k if k is None else k
    g = oracle.query(state.x, k)
    x_new = feasible_set.project(state.x - lam * g)
    return replace(state, x=x_new, x_bar_prev=state.x, x_bar=state.x, k=k + 1)


def srfb_step(state: SolverState, oracle: StochasticOracle, feasible_set, lam: float,
              delta: float, k: Optional[int] = None) -> SolverState:
    """Relax, x_bar = (1 - delta) x + delta x_bar_prev, then x+ = P(x_bar - lam F_hat(x))."""
    k = state.k if k is None else k
    x_bar = relax_combine(state.x, state.x_bar_prev, delta)
    g = oracle.query(state.x, k)
    x_new = feasible_set.project(x_bar - lam * g)
    return replace(state, x=x_new, x_bar_prev=x_bar, x_bar=x_bar, k=k + 1)


def eg_step(state: SolverState, oracle: StochasticOracle, feasible_set, lam: float,
            k: Optional[int] = None) -> SolverState:
    """Extrapolate y = P(x - lam F_hat(x)), then x+ = P(x - lam F_hat(y))."""
    k = state.k if k is None else k
    y = feasible_set.project(state.x - lam * oracle.query(state.x, k))
    x_new = feasible_set.project(state.x - lam * oracle.query(y, k))
    return replace(state, x=x_new, eg_midpoint=y, x_bar_prev=state.x, x_bar=state.x, k=k + 1)


def _adam_move(state, oracle, feasible_set, adam, t, anchor_fn):
    if t < 1:
        raise ParameterError("Adam time step counts from 1")
    g = oracle.query(state.x, t - 1)
    anchor = anchor_fn()
    x_new, z, y = kernels.adam_update(
        anchor, state.adam_z, state.adam_y, g,
        adam.beta1, adam.beta2, t, adam.alpha, adam.epsilon_reg,
    )
    return feasible_set.project(x_new), z, y, anchor


def adam_step(state: SolverState, oracle: StochasticOracle, feasible_set, adam: AdamParams,
              k: Optional[int] = None) -> SolverState:
    """One bias-corrected Adam update followed by a projection.

    ``k`` is the Adam time step and starts at 1; the oracle is queried with
    iteration index ``k - 1``.
    """
    t = state.k + 1 if k is None else k
    x_new, z, y, _ = _adam_move(state, oracle, feasible_set, adam, t, lambda: state.x)
    return replace(state, x=x_new, adam_z=z, adam_y=y, adam_t=t,
                   x_bar_prev=state.x, x_bar=state.x, k=t)


def relaxed_adam_step(state: SolverState, oracle: StochasticOracle, feasible_set,
                      adam: AdamParams, delta: float, k: Optional[int] = None) -> SolverState:
    """Adam update anchored at the relaxed point x_bar instead of x."""
    t = state.k + 1 if k is None else k
    x_new, z, y, x_bar = _adam_move(
        state, oracle, feasible_set, adam, t,
        lambda: relax_combine(state.x, state.x_bar_prev, delta),
    )
    return replace(state, x=x_new, adam_z=z, adam_y=y, adam_t=t,
                   x_bar_prev=x_bar, x_bar=x_bar, k=t)


def _step(config: SolverConfig, state, oracle, feasible_set, k):
    alg = config.algorithm
    if alg == "FB":
        return fb_step(state, oracle, feasible_set, config.lam, k)
    if alg in ("SRFB", "aSRFB"):
        return srfb_step(state, oracle, feasible_set, config.lam, config.delta, k)
    if alg == "EG":
        return eg_step(state, oracle, feasible_set, config.lam, k)
    if alg == "Adam":
        return adam_step(state, oracle, feasible_set, config.adam, k + 1)
    return relaxed_adam_step(state, oracle, feasible_set, config.adam, config.delta, k + 1)


def _average_weight(averaging: Averaging, avg: AverageState, k: int, lam: float):
    """Weight for iterate number ``k`` (1-based); may rescale the accumulated mass."""
    kind = averaging.kind
    if kind == "uniform":
        return avg, lam
    if kind == "weighted":
        w = averaging.weights
        return avg, w[min(k, len(w)) - 1]
    if kind == "geometric":
        # weights ratio**k, kept normalised so the newest weight is 1
        return AverageState(avg.X, avg.S / averaging.ratio), 1.0
    return AverageState(avg.X, avg.S * (1.0 - averaging.beta)), 1.0


def run_solver(
    game: Game,
    oracle: StochasticOracle,
    config: SolverConfig,
    x0=None,
    *,
    tolerance: Optional[float] = None,
    residual_lambda: Optional[float] = None,
    gap_every: int = 0,
    gap_budget: int = 4096,
    divergence_threshold: float = 1e6,
    snapshots: Sequence[int] = (),
    keep_iterates: bool = False,
    stop_at_tolerance: bool = False,
) -> RunRecord:
    """Run ``config.max_iters`` iterations and record one trace row per iterate.

    Row 0 is the starting point.  The gap column is filled every
    ``gap_every`` rows (0 disables it) and is evaluated at the running
    average when averaging is on.  ``snapshots`` lists iteration counts at
    which the current (averaged) point is stored on the record.  With
    ``stop_at_tolerance`` the run ends as soon as the residual reaches
    ``tolerance``; by default all seeds keep a common iteration grid.
    """
    fs = game.feasible_set
    x0 = fs.center() if x0 is None else as_vector(x0)
    if not fs.contains(x0, 1e-12):
        raise ParameterError("starting point must be feasible")
    res_lam = residual_lambda or config.lam or 1.0
    avg_on = config.averaging.enabled
    state = init_state(x0, averaging=avg_on)
    sol = game.known_solution
    scale = divergence_threshold * max(1.0, fs.diameter())
    want = set(int(s) for s in snapshots)

    rec = RunRecord(algorithm=config.algorithm, seed=oracle.seed)
    if keep_iterates:
        rec.iterates = [state.x.copy()]
        rec.relaxed = []
    t_start = time.perf_counter()

    def log_row(k, batch, point):
        dist = float(np.linalg.norm(state.x - sol)) if sol is not None else math.nan
        gap = math.nan
        if gap_every and k % gap_every == 0:
            gap = gap_estimate(point, game, gap_budget).value
        rec.append(
            k=k,
            batch_size=batch,
            samples_cum=oracle.samples_drawn,
            evals_cum=oracle.evaluations,
            residual=residual(state.x, game, res_lam),
            dist_to_solution=dist,
            gap_estimate=gap,
            wall_ms=1e3 * (time.perf_counter() - t_start),
        )

    log_row(0, 0, state.x)
    if 0 in want:
        rec.snapshots[0] = state.x.copy()
    status = "max_iters"
    for k in range(config.max_iters):
        batch = oracle.batch_for(k)
        with np.errstate(over="ignore", invalid="ignore"):
            state = _step(config, state, oracle, fs, k)
        if not np.all(np.isfinite(state.x)) or np.linalg.norm(state.x) > scale:
            status = "diverged"
            rec.message = f"non-finite or exploding iterate at k={k + 1}"
            break
        if avg_on:
            avg, w = _average_weight(config.averaging, state.average, k + 1, config.lam or 1.0)
            state.average = update_average(avg, state.x, w)
        if keep_iterates:
            rec.iterates.append(state.x.copy())
            rec.relaxed.append(state.x_bar.copy())
        point = state.average.X if avg_on else state.x
        log_row(k + 1, batch, point)
        if (k + 1) in want:
            rec.snapshots[k + 1] = point.copy()
        if stop_at_tolerance and tolerance is not None and rec.columns["residual"][-1] <= tolerance:
            break

    rec.final_x = state.x.copy()
    rec.averaged_x = state.average.X.copy() if avg_on and state.average.X is not None else None
    if status != "diverged" and tolerance is not None and rec.columns["residual"][-1] <= tolerance:
        status = "converged"
    rec.status = status
    rec.finalize()
    return rec


def relaxation_identity_errors(iterates, relaxed, delta: float, x_star) -> dict:
    """Worst violation of the three algebraic relations of the relaxed iteration.

    ``iterates[k]`` is x^k and ``relaxed[k]`` is x_bar^k.  Relation 3 is
    evaluated twice: as commonly printed, with x^k on the left, and in the
    form that follows from the relaxation rule, with x_bar^k in place of x^k
    on both sides.
    """
    xs = np.asarray(iterates, dtype=float)
    xb = np.asarray(relaxed, dtype=float)
    x_star = as_vector(x_star)
    K = xb.shape[0]
    e1 = e2 = e3 = e3c = 0.0
    for k in range(1, K):
        # (1) x^k - xb^{k-1} = (x^k - xb^k) / delta
        if delta > 0:
            lhs = xs[k] - xb[k - 1]
            rhs = (xs[k] - xb[k]) / delta
            e1 = max(e1, float(np.linalg.norm(lhs - rhs)))
    for k in range(K - 1):
        # (2) x^{k+1} - x* = (xb^{k+1} - x*)/(1-d) - d (xb^k - x*)/(1-d)
        lhs = xs[k + 1] - x_star
        rhs = (xb[k + 1] - x_star) / (1 - delta) - delta * (xb[k] - x_star) / (1 - delta)
        e2 = max(e2, float(np.linalg.norm(lhs - rhs)))
        c = delta / (1 - delta) ** 2
        lit_l = c * float(np.sum((xb[k + 1] - xs[k]) ** 2))
        lit_r = delta * float(np.sum((xs[k + 1] - xs[k]) ** 2))
        e3 = max(e3, abs(lit_l - lit_r))
        cor_l = c * float(np.sum((xb[k + 1] - xb[k]) ** 2))
        cor_r = delta * float(np.sum((xs[k + 1] - xb[k]) ** 2))
        e3c = max(e3c, abs(cor_l - cor_r))
    return {"identity_1": e1, "identity_2": e2, "identity_3": e3, "identity_3_corrected": e3c}
