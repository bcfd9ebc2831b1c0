"""
Path simulation of the drift-implicit scheme on uniform grids.
"""

from .accumulate import CompensatedSum, RunningMoments
from .ensemble import (
    EnsembleResult,
    ErrorMode,
    MomentCurve,
    second_moment_curve,
    simulate_ensemble,
)
from .simulate import PathResult, integrate, simulate_path
from .tape import IncrementTape, StepIncrements, coarsen, grid_count, make_tape

__all__ = [
    "CompensatedSum",
    "EnsembleResult",
    "ErrorMode",
    "IncrementTape",
    "MomentCurve",
    "PathResult",
    "RunningMoments",
    "StepIncrements",
    "coarsen",
    "grid_count",
    "integrate",
    "make_tape",
    "second_moment_curve",
    "simulate_ensemble",
    "simulate_path",
]
