"""Relaxed forward-backward solvers for stochastic Nash equilibrium problems."""
__version__ = "0.1.0"

from ._jit import backend
from .core import (
    Ball,
    Box,
    ContractError,
    ParameterError,
    Product,
    StrategyProfile,
    diameter,
    project,
    relax_combine,
)
from .games import (
    Game,
    check_monotonicity,
    eval_pseudogradient,
    make_bilinear_saddle,
    make_dirac_gan,
    make_quadratic_game,
)
from .metrics import RunRecord, gap_estimate, residual, summarize
from .sampling import (
    SA,
    VR,
    BatchSchedule,
    NoiseModel,
    StochasticOracle,
    batch_size,
    sample_estimate,
    stochastic_error,
    variance_profile,
)
from .solvers import (
    AdamParams,
    Averaging,
    SolverConfig,
    default_stepsize,
    run_solver,
)
