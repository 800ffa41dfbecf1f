"""Hermite-expansion solver for path-independent stochastic differential equations."""

from .errors import (
    ConfigurationError,
    DomainError,
    EvaluationError,
    HermiteSdeError,
    SolverError,
    StartupError,
    StiffnessError,
)
from .hermite import GaussianWeight, HermiteEval, eval_hermite, eval_hermite_row, generating_partial_sum
from .quadrature import QuadratureRule, build_rule, expect, project_coefficient
from .solver import (
    CoefficientState,
    ExpansionSolution,
    Moments,
    SdeProblem,
    SolverConfig,
    evaluate,
    higher_moment,
    initial_coefficients,
    integrate,
    moments,
    rhs,
    startup_step,
)
from .baselines import PathEnsemble, SchemeResult, euler_maruyama, generate_paths, mc_moments, milstein
from .models import (
    ModelSpec,
    TimeFunction,
    arctan_model,
    build_model,
    check_path_independence,
    cir_instance,
    cir_special,
    custom,
    gbm,
)

__version__ = "0.1.0"
