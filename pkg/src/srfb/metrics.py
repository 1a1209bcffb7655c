"""Solution quality measures and run traces."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import qmc

from . import kernels
from .core import Box, ContractError, ParameterError, as_vector

__all__ = [
    "TRACE_COLUMNS",
    "RunRecord",
    "GapEstimate",
    "residual",
    "gap_estimate",
    "summarize",
    "averaging_bound_constant",
    "averaged_gap_bound",
    "estimate_bound_B",
    "noise_second_moment",
    "VARIANCE_FLOOR",
]

TRACE_COLUMNS = (
    "k",
    "batch_size",
    "samples_cum",
    "evals_cum",
    "residual",
    "dist_to_solution",
    "gap_estimate",
    "wall_ms",
)
_INT_COLUMNS = ("k", "batch_size", "samples_cum", "evals_cum")
VARIANCE_FLOOR = 1e-12
STATUSES = ("converged", "max_iters", "diverged")


@dataclass
class RunRecord:
    """Per-iteration trace of one seeded run plus its terminal state.

    Optional metrics that were not computed are stored as NaN and written
    as empty CSV cells.
    """

    algorithm: str = ""
    seed: object = None
    columns: dict = field(default_factory=lambda: {c: [] for c in TRACE_COLUMNS})
    final_x: Optional[np.ndarray] = None
    averaged_x: Optional[np.ndarray] = None
    status: str = "max_iters"
    message: str = ""
    snapshots: dict = field(default_factory=dict)
    iterates: Optional[list] = None
    relaxed: Optional[list] = None

    def append(self, **row):
        for c in TRACE_COLUMNS:
            self.columns[c].append(row[c])

    def finalize(self):
        for c in TRACE_COLUMNS:
            dtype = np.int64 if c in _INT_COLUMNS else float
            self.columns[c] = np.asarray(self.columns[c], dtype=dtype)
        if self.status not in STATUSES:
            raise ContractError(f"unknown status {self.status!r}")

    def __len__(self):
        return len(self.columns["k"])

    def __getitem__(self, name):
        return self.columns[name]

    def first_reaching(self, column: str, threshold: float):
        """Index of the first row whose ``column`` is <= threshold, or None."""
        vals = np.asarray(self.columns[column], dtype=float)
        hit = np.flatnonzero(vals <= threshold)
        return int(hit[0]) if hit.size else None


def residual(x, game, lam: float = 1.0) -> float:
    """Natural residual ||x - P(x - lam F(x))||, zero exactly at VI solutions."""
    if not lam > 0:
        raise ParameterError("residual step must be > 0")
    v = as_vector(x)
    fs = game.feasible_set
    return float(np.linalg.norm(v - fs.project(v - lam * game.field(v))))


@dataclass
class GapEstimate:
    value: float
    budget: int
    evaluations: int
    argmax: np.ndarray


def _phi(game, x, Y):
    return np.einsum("ij,ij->i", game.field(Y), x - Y)


def _project_rows(fs, Y):
    return np.stack([fs.project(y) for y in Y])


def _candidate_prefixes(fs, budget: int):
    """Nested candidate sets, coarse to fine, all feasible.

    Up to three dimensions the sets are dyadic grids over the bounding box;
    beyond that they are prefixes of an unscrambled Sobol sequence.  The
    prefix family for budget b is contained in the one for 2b.
    """
    lo, hi = fs.bounding_box()
    n = lo.size
    if n <= 3:
        j = 0
        while (2 ** (j + 1) + 1) ** n <= budget:
            j += 1
        m_fine = 2**j + 1
        axes = [np.linspace(lo[i], hi[i], m_fine) for i in range(n)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        proj = pts if _is_box(fs) else _project_rows(fs, pts)
        # dyadic grids nest: level `lev` is every 2**(j - lev)-th node of the finest
        out = []
        for lev in range(j + 1):
            idx = np.arange(0, m_fine, 2 ** (j - lev))
            mesh = np.stack(np.meshgrid(*([idx] * n), indexing="ij"), axis=-1).reshape(-1, n)
            out.append(np.ravel_multi_index(mesh.T, (m_fine,) * n))
        return proj, out
    sob = qmc.Sobol(n, scramble=False)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # non power-of-two draws
        pts = lo + sob.random(budget) * (hi - lo)
    proj = pts if _is_box(fs) else _project_rows(fs, pts)
    sizes = []
    m = budget
    while m >= 1:
        sizes.append(m)
        m //= 2
    return proj, [np.arange(s) for s in sorted(sizes)]


def _is_box(fs):
    return isinstance(fs, Box)


def _local_ascent(game, x, y0, f0, fs, max_iter=200):
    """Projected gradient ascent on phi(y) = <F(y), x - y>, accepting only gains."""
    n = y0.size
    scale = max(fs.diameter(), 1e-12)
    h = 1e-7 * scale
    step = 0.1 * scale
    y, f = y0.copy(), f0
    evals = 0
    eye = np.eye(n) * h
    for _ in range(max_iter):
        probes = np.concatenate([y + eye, y - eye])
        vals = _phi(game, x, probes)
        evals += 2 * n
        grad = (vals[:n] - vals[n:]) / (2 * h)
        gnorm = np.linalg.norm(grad)
        if not np.isfinite(gnorm) or gnorm == 0:
            break
        improved = False
        while step > 1e-12 * scale:
            cand = fs.project(y + step * grad / gnorm)
            fc = float(_phi(game, x, cand[None, :])[0])
            evals += 1
            if fc > f:
                y, f = cand, fc
                step *= 1.5
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return y, f, evals


def gap_estimate(x, game, budget: int = 4096) -> GapEstimate:
    """Certified lower bound on err(x) = max_{y in set} <F(y), x - y>.

    Candidates come from nested deterministic point sets (see
    ``_candidate_prefixes``); each prefix's best point is refined by local
    ascent.  The running max is reported, so the estimate never drops when
    the budget grows.  ``y = x`` is always a candidate, hence the value is
    nonnegative.
    """
    if budget < 1:
        raise ParameterError("gap budget must be >= 1")
    x = as_vector(x).astype(float)
    fs = game.feasible_set
    pts, prefixes = _candidate_prefixes(fs, int(budget))
    Fy = np.ascontiguousarray(game.field(pts), dtype=float)
    best_val, best_y = 0.0, x.copy()
    evals = len(pts)
    seen = set()
    for idx in prefixes:
        v, i = kernels.gap_max(np.ascontiguousarray(Fy[idx]), np.ascontiguousarray(pts[idx]), x)
        j = int(idx[i])
        if j in seen:
            continue
        seen.add(j)
        y, f, e = _local_ascent(game, x, pts[j], v, fs)
        evals += e
        if f > best_val:
            best_val, best_y = f, y
    return GapEstimate(float(best_val), int(budget), evals, best_y)


def summarize(records, metric: str = "residual") -> dict:
    """Cross-seed statistics of one trace column, per iteration.

    Variance is the unbiased estimator (0 for a single record).  The
    mean-to-variance ratio divides by max(variance, 1e-12); ``floored``
    marks the rows where the floor was hit.
    """
    records = list(records)
    if not records:
        raise ContractError("summarize needs at least one record")
    ks = np.asarray(records[0].columns["k"])
    for r in records[1:]:
        if not np.array_equal(np.asarray(r.columns["k"]), ks):
            raise ContractError("records do not share an iteration grid")
    M = np.stack([np.asarray(r.columns[metric], dtype=float) for r in records])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mean = np.nanmean(M, axis=0) if M.size else M
        var = np.nanvar(M, axis=0, ddof=1) if len(records) > 1 else np.zeros(M.shape[1])
        lo = np.nanmin(M, axis=0)
        hi = np.nanmax(M, axis=0)
    var = np.where(np.isnan(var) & ~np.isnan(mean), 0.0, var)
    floored = var < VARIANCE_FLOOR
    ratio = mean / np.maximum(var, VARIANCE_FLOOR)
    return {"k": ks, "mean": mean, "variance": var, "min": lo, "max": hi,
            "ratio": ratio, "floored": floored, "n": len(records)}


def averaging_bound_constant(delta: float) -> float:
    """c = (2 - delta^2) / (1 - delta)."""
    if not 0 <= delta < 1:
        raise ParameterError("delta must lie in [0, 1)")
    return (2.0 - delta**2) / (1.0 - delta)


def averaged_gap_bound(delta: float, R: float, lam: float, K: int, B: float, sigma2: float) -> float:
    """Expected gap bound of the averaged iterate: c R / (lam K) + (2 B^2 + sigma^2) lam."""
    return averaging_bound_constant(delta) * R / (lam * K) + (2.0 * B**2 + sigma2) * lam


def estimate_bound_B(oracle) -> float:
    """B from a pilot run: max per-sample estimator norm plus its sample std."""
    mx, _, sd = oracle.norm_stats()
    return mx + sd


def noise_second_moment(noise, dim: int, batch: int = 1) -> float:
    """Bound on E||eps||^2 for an additive Gaussian noise with per-entry sigma."""
    if noise.multiplicative:
        raise ParameterError("second-moment bound is only closed-form for additive noise")
    return dim * noise.sigma**2 / batch

