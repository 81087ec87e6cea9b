"""Optimal stopping of spectrally negative Lévy processes under state-dependent discounting.

Single-threshold problems are solved through the representation of the reward
as an expectation of a nondecreasing function of the discounted running
maximum; multiple-stopping problems (refraction periods, running costs) are
solved level by level on top of that.
"""

from .discounting import (
    ConstantRate,
    HazardProfile,
    LocalTimeAtZero,
    OccupationNegative,
    make_profile,
)
from .errors import (
    ConditionMViolation,
    ConfigError,
    ConsistencyError,
    DivergenceError,
    DomainError,
    GridExtensionError,
    InconclusiveError,
    IntegrabilityError,
    LevyStopError,
    ModelError,
    UnsupportedError,
)
from .levy_model import BrownianDrift, CramerLundbergExp, StableSN, laplace_exponent, phi_right_inverse
from .recursive_stop import (
    RecursiveSolution,
    RefractionProblem,
    RunningCostProblem,
    solve_refraction,
    solve_running_cost,
)
from .rewards import (
    CallLinear,
    ConstantCost,
    ConvexCombo,
    ExpAffine,
    IdentityPositive,
    PowerPositivePart,
    PutLike,
    condition_m_check,
    h_transform,
    mordecki_h,
    representative_h,
)
from .scale_fn import ScaleFunction, build_scale
from .single_stop import UNBOUNDED, ThresholdSolution, is_unbounded, solve_single, value_function

__version__ = "0.1.0"

__all__ = [
    "BrownianDrift",
    "CallLinear",
    "ConditionMViolation",
    "ConfigError",
    "ConsistencyError",
    "ConstantCost",
    "ConstantRate",
    "ConvexCombo",
    "CramerLundbergExp",
    "DivergenceError",
    "DomainError",
    "ExpAffine",
    "GridExtensionError",
    "HazardProfile",
    "IdentityPositive",
    "InconclusiveError",
    "IntegrabilityError",
    "LevyStopError",
    "LocalTimeAtZero",
    "ModelError",
    "OccupationNegative",
    "PowerPositivePart",
    "PutLike",
    "RecursiveSolution",
    "RefractionProblem",
    "RunningCostProblem",
    "ScaleFunction",
    "StableSN",
    "ThresholdSolution",
    "UNBOUNDED",
    "UnsupportedError",
    "build_scale",
    "condition_m_check",
    "h_transform",
    "is_unbounded",
    "laplace_exponent",
    "make_profile",
    "mordecki_h",
    "phi_right_inverse",
    "representative_h",
    "solve_refraction",
    "solve_running_cost",
    "solve_single",
    "value_function",
]
