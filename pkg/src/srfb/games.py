"""Two-player games given by their pseudogradient field, and a small problem zoo.

Every field is vectorised: it accepts an array of shape ``(..., n)`` and
returns the same shape, so metrics can evaluate it on whole grids.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import expit

from .core import (
    Ball,
    Box,
    ContractError,
    ParameterError,
    Product,
    StrategyProfile,
    as_vector,
)

__all__ = [
    "Game",
    "MonotonicityReport",
    "eval_pseudogradient",
    "make_quadratic_game",
    "make_bilinear_saddle",
    "make_dirac_gan",
    "check_monotonicity",
    "sample_feasible",
    "pseudogradient_from_costs",
    "reference_solution",
    "random_quadratic_matrix",
]

MONOTONICITY_CLASSES = ("strongly_monotone", "monotone", "unknown")


@dataclass(frozen=True, eq=False)
class Game:
    player_dims: tuple
    feasible_set: object
    field: Callable[[np.ndarray], np.ndarray]
    lipschitz_constant: Optional[float] = None
    known_solution: Optional[np.ndarray] = None
    monotonicity_class: str = "unknown"
    name: str = "game"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.player_dims)
        if len(dims) != 2 or min(dims) < 1:
            raise ContractError("player_dims must be two positive integers (n_g, n_d)")
        object.__setattr__(self, "player_dims", dims)
        if self.feasible_set.dim != sum(dims):
            raise ContractError(
                f"feasible set has dimension {self.feasible_set.dim}, players need {sum(dims)}"
            )
        if self.monotonicity_class not in MONOTONICITY_CLASSES:
            raise ParameterError(f"unknown monotonicity class {self.monotonicity_class!r}")
        if self.known_solution is not None:
            sol = np.array(self.known_solution, dtype=float).reshape(-1)
            if sol.size != self.dim:
                raise ContractError("known_solution has the wrong dimension")
            if not self.feasible_set.contains(sol, 1e-10):
                raise ContractError("known_solution lies outside the feasible set")
            res = np.linalg.norm(sol - self.feasible_set.project(sol - self.field(sol)))
            if res > 1e-8:
                raise ContractError(f"known_solution violates the VI (residual {res:.3g})")
            sol.setflags(write=False)
            object.__setattr__(self, "known_solution", sol)

    @property
    def dim(self) -> int:
        return sum(self.player_dims)

    def __call__(self, x):
        return self.field(x)

    def profile(self, vector) -> StrategyProfile:
        return StrategyProfile(vector, self.player_dims)


def eval_pseudogradient(game: Game, x) -> np.ndarray:
    """Exact (noise-free) pseudogradient at ``x``."""
    v = as_vector(x)
    if v.size != game.dim:
        raise ContractError(f"dimension mismatch: point has {v.size} entries, game has {game.dim}")
    out = np.asarray(game.field(v), dtype=float)
    if out.shape != (game.dim,):
        raise ContractError("pseudogradient returned the wrong shape")
    return out


def _split(split, n):
    n_g, n_d = (int(s) for s in split)
    if n_g < 1 or n_d < 1 or n_g + n_d != n:
        raise ContractError(f"split {split} does not partition dimension {n}")
    return n_g, n_d


def reference_solution(field_fn, feasible_set, mu: float, ell: float, x0=None,
                       tol: float = 1e-12, max_iter: int = 1_000_000) -> np.ndarray:
    """Solve the VI of a strongly monotone field by projected fixed-point iteration.

    With step ``mu / ell**2`` the map ``x -> P(x - step F(x))`` is a contraction
    of modulus ``sqrt(1 - mu**2 / ell**2)``.  Iterates until the natural
    residual drops below ``tol``.
    """
    step = mu / ell**2
    x = feasible_set.center() if x0 is None else as_vector(x0).copy()
    for _ in range(max_iter):
        x_new = feasible_set.project(x - step * field_fn(x))
        res = np.linalg.norm(x - feasible_set.project(x - field_fn(x)))
        x = x_new
        if res <= tol:
            return x
    raise RuntimeError("reference solve did not reach tolerance")


def make_quadratic_game(Q, q, feasible_set, split) -> Game:
    """Affine game F(x) = Qx + q with a positive definite symmetric part."""
    Q = np.array(Q, dtype=float)
    q = np.array(q, dtype=float).reshape(-1)
    n = q.size
    if Q.shape != (n, n):
        raise ContractError(f"Q must be {n}x{n}, got {Q.shape}")
    if feasible_set.dim != n:
        raise ContractError("feasible set dimension does not match Q")
    mu = float(np.linalg.eigvalsh(0.5 * (Q + Q.T)).min())
    if mu <= 1e-8:
        raise ParameterError(f"Q is not strongly monotone (min eigenvalue of sym part {mu:.3g})")
    ell = float(np.linalg.norm(Q, 2))
    Qt = Q.T.copy()

    def field_fn(x):
        return x @ Qt + q

    sol = reference_solution(field_fn, feasible_set, mu, ell)
    return Game(
        player_dims=_split(split, n),
        feasible_set=feasible_set,
        field=field_fn,
        lipschitz_constant=ell,
        known_solution=sol,
        monotonicity_class="strongly_monotone",
        name="quadratic",
        params={"Q": Q.tolist(), "q": q.tolist(), "mu": mu},
    )


def make_bilinear_saddle(A, feasible_set) -> Game:
    """Zero-sum game min_g max_d x_d^T A x_g, with field (A^T x_d, -A x_g)."""
    A = np.atleast_2d(np.array(A, dtype=float))
    if not np.all(np.isfinite(A)):
        raise ContractError("A must be finite")
    n_d, n_g = A.shape
    if feasible_set.dim != n_g + n_d:
        raise ContractError(f"feasible set dimension {feasible_set.dim} != {n_g + n_d}")
    At = A.T.copy()

    def field_fn(x):
        xg, xd = x[..., :n_g], x[..., n_g:]
        return np.concatenate([xd @ A, -(xg @ At)], axis=-1)

    origin = np.zeros(n_g + n_d)
    sol = origin if feasible_set.contains(origin) else None
    return Game(
        player_dims=(n_g, n_d),
        feasible_set=feasible_set,
        field=field_fn,
        lipschitz_constant=float(np.linalg.norm(A, 2)),
        known_solution=sol,
        monotonicity_class="monotone",
        name="bilinear",
        params={"A": A.tolist()},
    )


def _dphi_linear(t):
    return np.ones_like(t)


def _dphi_logistic(t):
    # phi(t) = -log(1 + exp(-t))  =>  phi'(t) = 1 / (1 + exp(t))
    return expit(-t)


_MEASURING = {"linear": _dphi_linear, "logistic": _dphi_logistic}


def make_dirac_gan(measuring_fn: str, feasible_set) -> Game:
    """Dirac-GAN: generator g(z) = theta, discriminator d(v) = psi * v, data at 0.

    The field is (psi phi'(theta psi), -theta phi'(theta psi)).
    """
    if measuring_fn not in _MEASURING:
        raise ParameterError(f"unsupported measuring function {measuring_fn!r}")
    if feasible_set.dim != 2:
        raise ContractError("Dirac-GAN lives in two dimensions")
    if not feasible_set.contains(np.zeros(2)):
        raise ContractError("Dirac-GAN feasible set must contain the origin")
    dphi = _MEASURING[measuring_fn]

    def field_fn(x):
        theta, psi = x[..., 0], x[..., 1]
        w = dphi(theta * psi)
        return np.stack([psi * w, -theta * w], axis=-1)

    linear = measuring_fn == "linear"
    return Game(
        player_dims=(1, 1),
        feasible_set=feasible_set,
        field=field_fn,
        # phi' is bounded by 1 and its derivative by 1/4, but the logistic
        # field has no global constant on a large box; leave it unknown.
        lipschitz_constant=1.0 if linear else None,
        known_solution=np.zeros(2),
        monotonicity_class="monotone" if linear else "unknown",
        name=f"dirac_gan_{measuring_fn}",
        params={"measuring_fn": measuring_fn},
    )


def random_quadratic_matrix(n: int, mu: float, coupling: float, seed: int) -> np.ndarray:
    """Random Q = mu I + PSD part + skew part, with sym-part min eigenvalue mu."""
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((n, n))
    S = G @ G.T / n
    S -= np.linalg.eigvalsh(S).min() * np.eye(n)
    K = rng.standard_normal((n, n))
    K = coupling * (K - K.T) / 2.0
    return mu * np.eye(n) + S + K


def sample_feasible(feasible_set, rng, size: int) -> np.ndarray:
    """Draw feasible points: uniform for boxes and balls, blockwise for products."""
    if isinstance(feasible_set, Box):
        u = rng.random((size, feasible_set.dim))
        return feasible_set.lower + u * (feasible_set.upper - feasible_set.lower)
    if isinstance(feasible_set, Ball):
        n = feasible_set.dim
        d = rng.standard_normal((size, n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        r = feasible_set.radius * rng.random(size) ** (1.0 / n)
        return feasible_set.center_point + d * r[:, None]
    if isinstance(feasible_set, Product):
        return np.concatenate([sample_feasible(m, rng, size) for m in feasible_set.members], axis=1)
    raise ContractError(f"cannot sample from {type(feasible_set).__name__}")


@dataclass
class MonotonicityReport:
    min_inner_product: float
    witness_x: np.ndarray
    witness_y: np.ndarray
    trials: int

    @property
    def monotone(self) -> bool:
        return self.min_inner_product >= -1e-10


def check_monotonicity(game: Game, trials: int, rng_seed: int) -> MonotonicityReport:
    """Minimum of <F(x) - F(y), x - y> over random feasible pairs."""
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    rng = np.random.default_rng(rng_seed)
    X = sample_feasible(game.feasible_set, rng, trials)
    Y = sample_feasible(game.feasible_set, rng, trials)
    vals = np.einsum("ij,ij->i", game.field(X) - game.field(Y), X - Y)
    j = int(np.argmin(vals))
    return MonotonicityReport(float(vals[j]), X[j].copy(), Y[j].copy(), trials)


def pseudogradient_from_costs(costs, player_dims, x, h: float = 1e-6) -> np.ndarray:
    """Stack each player's partial gradient of its own cost, by central differences.

    ``costs`` is a pair of callables J_i(x) on the joint vector.
    """
    x = as_vector(x).astype(float)
    out = np.empty_like(x)
    start = 0
    for cost, n_i in zip(costs, player_dims):
        for i in range(start, start + n_i):
            e = np.zeros_like(x)
            e[i] = h
            out[i] = (cost(x + e) - cost(x - e)) / (2 * h)
        start += n_i
    return out

