"""Interior-point Lagrangian decomposition for separable convex programs.

Each block's box constraints are smoothed by a logarithmic barrier, block
subproblems are solved by Newton's method, and the smoothed (negated) dual is
minimized by a damped Newton path-following scheme in the multipliers.
"""

from .baselines import AdiConfig, adi_solve, oracle_central_point, oracle_optimum
from .block_solver import DELTA_STAR, solve_block
from .dual_newton import DualEvaluator, DualState, dual_value
from .errors import (
    BadSlackBounds,
    DecompositionError,
    DimensionMismatch,
    DomainViolation,
    GenInfeasible,
    HessianNotPD,
    Infeasible,
    MaxIterExceeded,
    ProblemFileError,
    UnsupportedObjective,
)
from .functions import BoxLog, Linear, Quadratic, ScaledSum, TotalDelay
from .generators import GenSpec, generate
from .path_following import PathConfig, SolveReport, center, short_step_factor, solve, step_size
from .problem import Block, Box, SeparableProblem, add_slack_block, find_interior_point, validate_rank

__version__ = "0.1.0"

__all__ = [
    "AdiConfig",
    "BadSlackBounds",
    "Block",
    "Box",
    "BoxLog",
    "DELTA_STAR",
    "DecompositionError",
    "DimensionMismatch",
    "DomainViolation",
    "DualEvaluator",
    "DualState",
    "GenInfeasible",
    "GenSpec",
    "HessianNotPD",
    "Infeasible",
    "Linear",
    "MaxIterExceeded",
    "PathConfig",
    "ProblemFileError",
    "Quadratic",
    "ScaledSum",
    "SeparableProblem",
    "SolveReport",
    "TotalDelay",
    "UnsupportedObjective",
    "adi_solve",
    "add_slack_block",
    "center",
    "dual_value",
    "find_interior_point",
    "generate",
    "oracle_central_point",
    "oracle_optimum",
    "short_step_factor",
    "solve",
    "solve_block",
    "step_size",
    "validate_rank",
]
