"""
Brownian and Lévy increment generation with statistical self-validation.
"""

from .moments import MomentReport, levy_measure_constant, validate_moment_conditions
from .samplers import (
    TemperedDraw,
    sample_alpha_stable,
    sample_brownian_increments,
    sample_compound_poisson,
    sample_levy_increments,
    sample_tempered_stable,
)
from .seeds import SeedPolicy, StreamTag
from .spec import JumpLaw, LevyKind, NoiseSpec

__all__ = [
    "JumpLaw",
    "LevyKind",
    "MomentReport",
    "NoiseSpec",
    "SeedPolicy",
    "StreamTag",
    "TemperedDraw",
    "levy_measure_constant",
    "sample_alpha_stable",
    "sample_brownian_increments",
    "sample_compound_poisson",
    "sample_levy_increments",
    "sample_tempered_stable",
    "validate_moment_conditions",
]
