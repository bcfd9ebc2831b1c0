"""
SDE problem declarations, assumption constants and empirical assumption probes.
"""

from .builtin import builtin_names, builtin_problem, problem_from_config
from .constants import AssumptionConstants, estimate_origin_bounds
from .problem import SdeProblem, finite_difference_jacobian

__all__ = [
    "AssumptionConstants",
    "SdeProblem",
    "builtin_names",
    "builtin_problem",
    "estimate_origin_bounds",
    "finite_difference_jacobian",
    "problem_from_config",
]
