"""Stochastic SQP for equality-constrained problems.

Adaptive l1 merit parameter, prescribed stepsizes, exact-gradient
diagnostics alongside every stochastic step, and Monte Carlo
verifiers for the probabilistic guarantees the method rests on.
"""

from stosqp.backend import BACKEND, get_backend
from stosqp.driver import (
    AlgoConfig,
    BetaSchedule,
    HessianPolicy,
    IterationRecord,
    RunResult,
    compute_stepsize,
    run,
    sample_kstar,
    step_once,
    true_quantities,
)
from stosqp.errors import (
    ConfigError,
    CurvatureViolation,
    DimensionMismatch,
    DivisionByZero,
    EmptySchedule,
    ExperimentFailure,
    InvalidConstant,
    InvalidDelta,
    InvalidDimension,
    InvalidInterval,
    InvalidRange,
    NonPositiveTau,
    SingularSystem,
    StosqpError,
)
from stosqp.kkt import (
    KktFactorization,
    KktSolution,
    KktSystem,
    StepDecomposition,
    assemble_kkt_matrix,
    check_reduced_curvature,
    decompose_step,
    nullspace_basis,
    solve_kkt,
)
from stosqp.merit import (
    INFINITE,
    Infinite,
    MeritParams,
    MeritState,
    delta_q,
    l1_norm,
    phi,
    phi_value,
    tau_trial,
    update_tau,
    update_xi,
    xi_trial,
)
from stosqp.problems import (
    NoiseModel,
    Problem,
    make_quadratic,
    make_random_licq,
    make_rosenbrock_sphere,
    sample_gradient,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "get_backend",
    "AlgoConfig",
    "BetaSchedule",
    "HessianPolicy",
    "IterationRecord",
    "MeritState",
    "RunResult",
    "compute_stepsize",
    "run",
    "sample_kstar",
    "step_once",
    "true_quantities",
    "StosqpError",
    "ConfigError",
    "CurvatureViolation",
    "DimensionMismatch",
    "DivisionByZero",
    "EmptySchedule",
    "ExperimentFailure",
    "InvalidConstant",
    "InvalidDelta",
    "InvalidDimension",
    "InvalidInterval",
    "InvalidRange",
    "NonPositiveTau",
    "SingularSystem",
    "KktFactorization",
    "KktSolution",
    "KktSystem",
    "StepDecomposition",
    "assemble_kkt_matrix",
    "check_reduced_curvature",
    "decompose_step",
    "nullspace_basis",
    "solve_kkt",
    "INFINITE",
    "Infinite",
    "MeritParams",
    "delta_q",
    "l1_norm",
    "phi",
    "phi_value",
    "tau_trial",
    "update_tau",
    "update_xi",
    "xi_trial",
    "NoiseModel",
    "Problem",
    "make_quadratic",
    "make_random_licq",
    "make_rosenbrock_sphere",
    "sample_gradient",
    "__version__",
]
