"""Fast invariant checks behind ``srfb selftest``.

Each check returns ``(name, passed, detail)``.  They are small versions of
the pytest suites, meant for a quick sanity pass on an installed build.
"""
import warnings

import numpy as np

from .core import Ball, Box, Product, project
from .games import check_monotonicity, make_bilinear_saddle, make_dirac_gan, make_quadratic_game
from .metrics import gap_estimate, residual
from .sampling import SA, BatchSchedule, NoiseModel, StochasticOracle, VR, fit_loglog_slope, variance_profile
from .solvers import SolverConfig, relaxation_identity_errors, run_solver


def _projection(rng):
    sets = [Box([-1, 0, 2], [1, 3, 2.5]), Ball([0.5, -1, 0], 1.5),
            Product((Box([0], [1]), Ball([0, 0], 2.0)))]
    worst_idem = worst_nonexp = worst_vi = 0.0
    for fs in sets:
        for _ in range(200):
            x, y = rng.normal(scale=3, size=(2, fs.dim))
            px, py = project(fs, x), project(fs, y)
            worst_idem = max(worst_idem, np.abs(project(fs, px) - px).max())
            worst_nonexp = max(worst_nonexp, np.linalg.norm(px - py) - np.linalg.norm(x - y))
            worst_vi = min(worst_vi, (px - x) @ (py - px))
    ok = worst_idem <= 1e-10 and worst_nonexp <= 1e-10 and worst_vi >= -1e-10
    return "projection idempotent / non-expansive / variational", ok, \
        f"idem={worst_idem:.1e} nonexp={worst_nonexp:.1e} vi={worst_vi:.1e}"


def _monotonicity():
    bil = make_bilinear_saddle([[1.0, 2.0], [0.5, -1.0]], Box([-2] * 4, [2] * 4))
    quad = make_quadratic_game(np.eye(3), np.zeros(3), Box([-1] * 3, [1] * 3), (1, 2))
    logi = make_dirac_gan("logistic", Box([-3, -3], [3, 3]))
    m_b = check_monotonicity(bil, 10_000, 0).min_inner_product
    m_q = check_monotonicity(quad, 10_000, 0).min_inner_product
    m_l = check_monotonicity(logi, 10_000, 0).min_inner_product
    ok = abs(m_b) <= 1e-10 and m_q >= 0 and m_l < 0
    return "monotonicity certificates", ok, f"bilinear={m_b:.1e} quadratic={m_q:.2e} logistic={m_l:.3f}"


def _relaxation_identities(rng):
    game = make_quadratic_game(np.array([[1.0, 1.0], [-1.0, 1.0]]), [0.3, -0.2], Box([-1, -1], [1, 1]), (1, 1))
    worst = {}
    for delta in (0.62, 0.8, 0.95):
        oracle = StochasticOracle(game, NoiseModel(sigma=0.3), SA(1), seed=int(rng.integers(1 << 30)))
        rec = run_solver(game, oracle, SolverConfig("SRFB", lam=0.1, delta=delta, max_iters=200),
                         x0=[0.9, -0.9], keep_iterates=True)
        errs = relaxation_identity_errors(rec.iterates, rec.relaxed, delta, rng.normal(size=2))
        for key, v in errs.items():
            worst[key] = max(worst.get(key, 0.0), v)
    ok = max(worst["identity_1"], worst["identity_2"], worst["identity_3_corrected"]) <= 1e-8
    detail = " ".join(f"{k}={v:.1e}" for k, v in worst.items())
    return "relaxation identities (printed form of 3 reported only)", ok, detail


def _accounting():
    game = make_bilinear_saddle([[1.0]], Ball([0, 0], 2.0))
    out = {}
    for alg in ("SRFB", "EG", "FB", "Adam", "RelaxedAdam"):
        oracle = StochasticOracle(game, NoiseModel(sigma=0.1), SA(3), seed=1)
        delta = 0.7 if alg in ("SRFB", "RelaxedAdam") else 0.0
        run_solver(game, oracle, SolverConfig(alg, lam=0.1, delta=delta, max_iters=100), x0=[1, 0])
        out[alg] = (oracle.evaluations, oracle.samples_drawn)
    ok = out["EG"] == (200, 600) and all(out[a] == (100, 300) for a in out if a != "EG")
    return "oracle-call accounting", ok, str(out)


def _equivalences():
    game = make_bilinear_saddle([[1.0]], Ball([0, 0], 2.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cfg0 = SolverConfig("SRFB", lam=0.2, delta=0.0, max_iters=300)
    a = run_solver(game, StochasticOracle(game, NoiseModel(sigma=0.5), SA(1), seed=7), cfg0,
                   x0=[1, 0], keep_iterates=True)
    b = run_solver(game, StochasticOracle(game, NoiseModel(sigma=0.5), SA(1), seed=7),
                   SolverConfig("FB", lam=0.2, max_iters=300), x0=[1, 0], keep_iterates=True)
    same = all(np.array_equal(u, v) for u, v in zip(a.iterates, b.iterates))
    return "SRFB(delta=0) equals FB", same, ""


def _variance_reduction():
    game = make_bilinear_saddle([[1.0]], Ball([0, 0], 2.0))
    oracle = StochasticOracle(game, NoiseModel(sigma=1.0), VR(BatchSchedule(1, 0, 1, 10**6)), seed=3)
    prof = variance_profile(oracle, [0.5, 0.5], [1, 2, 4, 8, 16, 32], 100)
    slope, _ = fit_loglog_slope(prof)
    return "variance reduction slope", abs(slope + 1) <= 0.15, f"slope={slope:.3f}"


def _solution_metrics():
    game = make_bilinear_saddle([[1.0]], Ball([0, 0], 2.0))
    r = residual(game.known_solution, game, 0.2)
    g = gap_estimate(game.known_solution, game, 1024).value
    return "residual and gap vanish at the solution", r <= 1e-8 and g <= 1e-6, f"res={r:.1e} gap={g:.1e}"


def run_selftest():
    rng = np.random.default_rng(20240501)
    return [
        _projection(rng),
        _monotonicity(),
        _relaxation_identities(rng),
        _accounting(),
        _equivalences(),
        _variance_reduction(),
        _solution_metrics(),
    ]
