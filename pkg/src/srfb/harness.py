"""Config-driven experiment runner: seed sweeps, CSV traces, summaries, comparisons.

Configs are JSON documents parsed strictly (unknown keys are errors).
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    model_validator,
)

from . import __version__
from ._jit import backend
from .core import Ball, Box, Product
from .games import (
    make_bilinear_saddle,
    make_dirac_gan,
    make_quadratic_game,
    random_quadratic_matrix,
)
from .metrics import TRACE_COLUMNS, RunRecord, summarize
from .sampling import RNG_VERSION, SA, VR, BatchSchedule, NoiseModel, StochasticOracle
from .solvers import AdamParams, Averaging, SolverConfig, default_stepsize, run_solver

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "build_game",
    "resolve_solver",
    "run_experiment",
    "write_trace_csv",
    "read_trace_csv",
    "summarize_dir",
    "compare",
]

SUMMARY_METRICS = ("residual", "dist_to_solution", "gap_estimate")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""


# --- schema ------------------------------------------------------------------

class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


class BoxSpec(_Strict):
    type: Literal["box"]
    lower: List[float]
    upper: List[float]


class BallSpec(_Strict):
    type: Literal["ball"]
    center: List[float]
    radius: PositiveFloat


class ProductSpec(_Strict):
    type: Literal["product"]
    members: List[Annotated[Union[BoxSpec, BallSpec], Field(discriminator="type")]]


SetSpec = Annotated[Union[BoxSpec, BallSpec, ProductSpec], Field(discriminator="type")]


class QuadraticProblem(_Strict):
    type: Literal["quadratic"]
    dims: Tuple[PositiveInt, PositiveInt]
    Q: Optional[List[List[float]]] = None
    q: Optional[List[float]] = None
    seed: Optional[int] = None
    mu: PositiveFloat = 1.0
    coupling: NonNegativeFloat = 1.0
    set: SetSpec
    x0: Optional[List[float]] = None

    @model_validator(mode="after")
    def _matrix_or_seed(self):
        if self.Q is None and self.seed is None:
            raise ValueError("give either an explicit Q or a seed to generate one")
        return self


class BilinearProblem(_Strict):
    type: Literal["bilinear"]
    A: List[List[float]]
    set: SetSpec
    x0: Optional[List[float]] = None


class DiracGanProblem(_Strict):
    type: Literal["dirac_gan"]
    measuring_fn: Literal["linear", "logistic"] = "linear"
    set: SetSpec
    x0: Optional[List[float]] = None


ProblemSpec = Annotated[
    Union[QuadraticProblem, BilinearProblem, DiracGanProblem], Field(discriminator="type")
]


class NoiseSpec(_Strict):
    kind: Literal["additive_gaussian", "multiplicative_gaussian"] = "additive_gaussian"
    sigma: NonNegativeFloat = 0.0


class ScheduleSpec(_Strict):
    b: PositiveFloat = 1.0
    k0: NonNegativeFloat = 1.0
    a: PositiveFloat = 1.0
    cap: PositiveInt = 1_000_000


class SamplingSpec(_Strict):
    mode: Literal["sa", "vr"] = "sa"
    batch: PositiveInt = 1
    schedule: Optional[ScheduleSpec] = None

    @model_validator(mode="after")
    def _vr_needs_schedule(self):
        if self.mode == "vr" and self.schedule is None:
            raise ValueError("mode 'vr' needs a schedule {b, k0, a, cap}")
        return self


class AdamSpec(_Strict):
    beta1: float = Field(0.5, ge=0, lt=1)
    beta2: float = Field(0.9, ge=0, lt=1)
    alpha: PositiveFloat = 1e-3
    epsilon_reg: PositiveFloat = 1e-8


class AveragingSpec(_Strict):
    kind: Literal["none", "uniform", "geometric", "exponential", "weighted"] = "none"
    ratio: PositiveFloat = 1.01
    beta: float = Field(0.01, gt=0, le=1)
    weights: Optional[List[PositiveFloat]] = None


class SolverSpec(_Strict):
    algorithm: Literal["FB", "SRFB", "aSRFB", "EG", "Adam", "RelaxedAdam"]
    lambda_: Union[Literal["auto"], PositiveFloat, None] = Field(None, alias="lambda")
    delta: float = Field(0.0, ge=0, lt=1)
    adam: AdamSpec = AdamSpec()
    averaging: Union[
        Literal["none", "uniform", "geometric", "exponential"], AveragingSpec
    ] = "none"

    def averaging_spec(self) -> AveragingSpec:
        if isinstance(self.averaging, str):
            return AveragingSpec(kind=self.averaging)
        return self.averaging


class SeedRange(_Strict):
    count: PositiveInt
    base: int = 0


class RunSpec(_Strict):
    K: NonNegativeInt
    seeds: Union[List[int], SeedRange] = Field(default_factory=lambda: [0])
    tolerance: Optional[PositiveFloat] = 1e-8
    divergence_threshold: PositiveFloat = 1e6
    residual_lambda: Optional[PositiveFloat] = None
    gap_every: NonNegativeInt = 0
    gap_budget: PositiveInt = 1024

    @model_validator(mode="after")
    def _seeds_nonempty(self):
        if isinstance(self.seeds, list) and not self.seeds:
            raise ValueError("seeds must not be empty")
        return self

    def seed_list(self) -> list:
        if isinstance(self.seeds, SeedRange):
            return list(range(self.seeds.base, self.seeds.base + self.seeds.count))
        return list(self.seeds)


class OutputSpec(_Strict):
    directory: str = "runs"
    trace_stride: PositiveInt = 1
    record_wall_time: bool = True


class ExperimentConfig(_Strict):
    problem: ProblemSpec
    noise: NoiseSpec = NoiseSpec()
    sampling: SamplingSpec = SamplingSpec()
    solver: SolverSpec
    run: RunSpec
    output: OutputSpec = OutputSpec()

    @model_validator(mode="after")
    def _auto_lambda(self):
        s = self.solver
        if s.lambda_ == "auto":
            if s.algorithm not in ("SRFB", "aSRFB"):
                raise ValueError("solver.lambda: 'auto' is only defined for SRFB and aSRFB")
            if s.delta <= 0:
                raise ValueError("solver.lambda: 'auto' needs solver.delta > 0")
            if self.problem.type == "dirac_gan" and self.problem.measuring_fn == "logistic":
                raise ValueError("solver.lambda: 'auto' needs a game with a known Lipschitz constant")
        elif s.lambda_ is None and s.algorithm in ("FB", "SRFB", "aSRFB", "EG"):
            raise ValueError(f"solver.lambda is required for {s.algorithm}")
        return self


def _format_validation(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"] if not str(p).endswith("Problem") and not str(p).endswith("Spec"))
        loc = loc.replace("lambda_", "lambda")
        msg = e["msg"]
        lines.append(f"{loc}: {msg}" if loc else msg)
    return "; ".join(lines)


def parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_validation(err)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"{path}: {err.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}:{err.lineno}:{err.colno}: {err.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_config(data)


# --- building blocks ------------------------------------------------------------

def _build_set(spec):
    if spec.type == "box":
        return Box(spec.lower, spec.upper)
    if spec.type == "ball":
        return Ball(spec.center, spec.radius)
    return Product(tuple(_build_set(m) for m in spec.members))


def build_game(problem):
    fs = _build_set(problem.set)
    if problem.type == "quadratic":
        n = sum(problem.dims)
        Q = problem.Q if problem.Q is not None else random_quadratic_matrix(
            n, problem.mu, problem.coupling, problem.seed)
        q = problem.q if problem.q is not None else np.zeros(n)
        return make_quadratic_game(Q, q, fs, problem.dims)
    if problem.type == "bilinear":
        return make_bilinear_saddle(problem.A, fs)
    return make_dirac_gan(problem.measuring_fn, fs)


def build_oracle(config: ExperimentConfig, game, seed) -> StochasticOracle:
    noise = NoiseModel(config.noise.kind, config.noise.sigma)
    smp = config.sampling
    if smp.mode == "sa":
        mode = SA(smp.batch)
    else:
        sch = smp.schedule
        mode = VR(BatchSchedule(sch.b, sch.k0, sch.a, sch.cap))
    return StochasticOracle(game, noise, mode, seed=seed)


def resolve_solver(config: ExperimentConfig, game) -> SolverConfig:
    s = config.solver
    lam = s.lambda_
    if lam == "auto":
        if game.lipschitz_constant is None:
            raise ConfigError("solver.lambda: 'auto' needs a game with a known Lipschitz constant")
        lam = default_stepsize(game.lipschitz_constant, s.delta)
    av = s.averaging_spec()
    return SolverConfig(
        algorithm=s.algorithm,
        lam=lam,
        delta=s.delta,
        adam=AdamParams(s.adam.beta1, s.adam.beta2, s.adam.alpha, s.adam.epsilon_reg),
        averaging=Averaging(av.kind, av.ratio, av.beta, tuple(av.weights) if av.weights else None),
        max_iters=config.run.K,
    )


def run_single(config: ExperimentConfig, seed, solver_config: Optional[SolverConfig] = None) -> RunRecord:
    game = build_game(config.problem)
    solver_config = solver_config or resolve_solver(config, game)
    oracle = build_oracle(config, game, seed)
    r = config.run
    return run_solver(
        game, oracle, solver_config, config.problem.x0,
        tolerance=r.tolerance,
        residual_lambda=r.residual_lambda,
        gap_every=r.gap_every,
        gap_budget=r.gap_budget,
        divergence_threshold=r.divergence_threshold,
    )


def _worker(payload):
    data, seed = payload
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run_single(ExperimentConfig.model_validate(data), seed)


# --- files --------------------------------------------------------------------

def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def _stride_rows(n: int, stride: int):
    idx = list(range(0, n, stride))
    if n and idx[-1] != n - 1:
        idx.append(n - 1)
    return idx


def trace_csv_text(record: RunRecord, stride: int = 1, wall_time: bool = True) -> str:
    """CSV text with the fixed trace header; absent optionals are empty cells."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    cols = record.columns
    for i in _stride_rows(len(record), stride):
        row = [_cell(cols[c][i]) for c in TRACE_COLUMNS]
        if not wall_time:
            row[-1] = ""
        w.writerow(row)
    return buf.getvalue()


def write_trace_csv(record: RunRecord, path, stride: int = 1, wall_time: bool = True) -> Path:
    path = Path(path)
    _atomic_write(path, trace_csv_text(record, stride, wall_time))
    return path


def read_trace_csv(path) -> RunRecord:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = tuple(rows[0])
    if header != TRACE_COLUMNS:
        raise ConfigError(f"{path}: unexpected header {header}")
    rec = RunRecord()
    for row in rows[1:]:
        vals = {}
        for c, v in zip(header, row):
            if c in ("k", "batch_size", "samples_cum", "evals_cum"):
                vals[c] = int(v)
            else:
                vals[c] = float(v) if v != "" else math.nan
        rec.append(**vals)
    rec.finalize()
    return rec


def summary_csv_text(records, stride: int = 1) -> str:
    stats = {m: summarize(records, m) for m in SUMMARY_METRICS}
    header = ["k"]
    for m in SUMMARY_METRICS:
        header += [f"{m}_{s}" for s in ("mean", "var", "min", "max", "ratio")]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    ks = stats["residual"]["k"]
    for i in _stride_rows(len(ks), stride):
        row = [_cell(ks[i])]
        for m in SUMMARY_METRICS:
            st = stats[m]
            row += [_cell(st[key][i]) for key in ("mean", "variance", "min", "max", "ratio")]
        w.writerow(row)
    return buf.getvalue()


def _vec(v):
    return None if v is None else [float(t) for t in v]


def run_experiment(config: ExperimentConfig, out_dir=None, jobs: int = 1):
    """Run every seed, write traces, summary and manifest; return the records.

    Files in ``out_dir``: ``trace_seed<seed>.csv`` per seed, ``summary.csv``,
    ``manifest.json``.  Divergent runs are kept with status ``diverged``.
    """
    out = Path(out_dir or config.output.directory)
    game = build_game(config.problem)
    solver = resolve_solver(config, game)
    seeds = config.run.seed_list()
    data = config.model_dump(by_alias=True)
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_worker, [(data, s) for s in seeds]))
    else:
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            records = [run_single(config, s, solver) for s in seeds]

    stride = config.output.trace_stride
    wall = config.output.record_wall_time
    runs = []
    for seed, rec in zip(seeds, records):
        name = f"trace_seed{seed}.csv"
        write_trace_csv(rec, out / name, stride, wall)
        runs.append({
            "seed": seed,
            "file": name,
            "status": rec.status,
            "message": rec.message,
            "final_x": _vec(rec.final_x),
            "averaged_x": _vec(rec.averaged_x),
            "evaluations": int(rec["evals_cum"][-1]),
            "samples": int(rec["samples_cum"][-1]),
            "final_residual": float(rec["residual"][-1]),
        })
    _atomic_write(out / "summary.csv", summary_csv_text(records, stride))
    manifest = {
        "software": {
            "package": "srfb",
            "version": __version__,
            "rng": RNG_VERSION,
            "kernel_backend": backend(),
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "config": data,
        "resolved": {
            "algorithm": solver.algorithm,
            "lambda": solver.lam,
            "delta": solver.delta,
            "adam": {"beta1": solver.adam.beta1, "beta2": solver.adam.beta2,
                     "alpha": solver.adam.alpha, "epsilon_reg": solver.adam.epsilon_reg},
            "averaging": solver.averaging.kind,
            "K": solver.max_iters,
            "seeds": seeds,
            "lipschitz_constant": game.lipschitz_constant,
            "known_solution": _vec(game.known_solution),
            "x0": _vec(config.problem.x0) if config.problem.x0 else _vec(game.feasible_set.center()),
            "monotonicity_class": game.monotonicity_class,
        },
        "runs": runs,
    }
    _atomic_write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return records


# --- reading results back ------------------------------------------------------

def _load_manifest(d: Path) -> dict:
    try:
        return json.loads((d / "manifest.json").read_text())
    except OSError:
        raise ConfigError(f"{d}: no manifest.json, not an experiment directory") from None


def load_experiment(d):
    d = Path(d)
    man = _load_manifest(d)
    records = []
    for run in man["runs"]:
        rec = read_trace_csv(d / run["file"])
        rec.algorithm = man["resolved"]["algorithm"]
        rec.seed = run["seed"]
        rec.status = run["status"]
        records.append(rec)
    return man, records


def summarize_dir(d) -> list:
    """Final-row cross-seed statistics for one experiment directory."""
    man, records = load_experiment(d)
    rows = []
    for m in SUMMARY_METRICS:
        st = summarize(records, m)
        rows.append({
            "metric": m,
            "mean": float(st["mean"][-1]),
            "variance": float(st["variance"][-1]),
            "min": float(st["min"][-1]),
            "max": float(st["max"][-1]),
            "ratio": float(st["ratio"][-1]),
        })
    statuses = {}
    for rec in records:
        statuses[rec.status] = statuses.get(rec.status, 0) + 1
    return rows, statuses, man


def _median(vals):
    vals = [v for v in vals]
    if not vals:
        return math.nan
    return float(np.median(np.asarray(vals, dtype=float)))


def compare(dirs, tolerance: Optional[float] = None) -> list:
    """One row per experiment: median oracle cost to reach ``residual <= tol``.

    Unreached seeds count as infinite cost, so the median reads "not reached"
    when at least half the seeds never got there.
    """
    loaded = [(Path(d), *load_experiment(d)) for d in dirs]
    if not loaded:
        raise ConfigError("compare needs at least one directory")
    ref = loaded[0][1]["config"]["problem"]
    for d, man, _ in loaded[1:]:
        if man["config"]["problem"] != ref:
            raise ConfigError(f"{d}: problem differs from {loaded[0][0]}; refusing to compare")
    rows = []
    for d, man, records in loaded:
        tol = tolerance if tolerance is not None else man["config"]["run"].get("tolerance") or 1e-8
        evals, samples = [], []
        for rec in records:
            i = rec.first_reaching("residual", tol)
            evals.append(math.inf if i is None else rec["evals_cum"][i])
            samples.append(math.inf if i is None else rec["samples_cum"][i])
        wall = [rec["wall_ms"][-1] for rec in records]
        rows.append({
            "experiment": str(d),
            "algorithm": man["resolved"]["algorithm"],
            "tolerance": tol,
            "evals_to_tol": _median(evals),
            "samples_to_tol": _median(samples),
            "evals_total": _median([rec["evals_cum"][-1] for rec in records]),
            "samples_total": _median([rec["samples_cum"][-1] for rec in records]),
            "final_residual": _median([rec["residual"][-1] for rec in records]),
            "final_gap": _median([rec["gap_estimate"][-1] for rec in records]),
            "wall_ms": _median(wall) if not all(math.isnan(w) for w in wall) else math.nan,
            "diverged": sum(rec.status == "diverged" for rec in records),
            "seeds": len(records),
        })
    return rows


def format_table(rows: list, columns: list) -> str:
    def fmt(v):
        if isinstance(v, float):
            if math.isinf(v):
                return "not reached"
            if math.isnan(v):
                return "-"
            return f"{v:.6g}"
        return str(v)

    cells = [[fmt(r[c]) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)
