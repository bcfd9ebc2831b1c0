from .implicit import (
    DEFAULT_CONFIG,
    ImplicitStepConfig,
    SolverStats,
    StepDiagnostics,
    bisection_bracket,
    newton_residual,
    solve_implicit_step,
)

__all__ = [
    "DEFAULT_CONFIG",
    "ImplicitStepConfig",
    "SolverStats",
    "StepDiagnostics",
    "bisection_bracket",
    "newton_residual",
    "solve_implicit_step",
]
