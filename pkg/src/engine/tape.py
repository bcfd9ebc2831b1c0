"""
Increment tapes: the finest-grid record of one path's driving noise, shared by
every step size simulated for that path.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from src.errors import ConfigurationError
from src.model.problem import SdeProblem
from src.noise.samplers import draw_levy, sample_brownian_increments
from src.noise.seeds import SeedPolicy, StreamTag

_GRID_SLACK = 1e-9


def grid_count(horizon: float, dt: float) -> int:
    """N = floor(T / dt), tolerant to the rounding of dyadic step sizes."""
    if not (dt > 0 and math.isfinite(dt)):
        raise ConfigurationError(f"dt must be a finite value > 0, got {dt}")
    return int(math.floor(horizon / dt + _GRID_SLACK))


def coarsening_factor(fine_dt: float, dt: float) -> int:
    ratio = dt / fine_dt
    k = round(ratio)
    if k < 1 or abs(ratio - k) > _GRID_SLACK * ratio:
        raise ConfigurationError(f"dt={dt} is not a multiple of the tape step {fine_dt}")
    return int(k)


class StepIncrements(NamedTuple):
    brownian: np.ndarray  # (N, m)
    levy: np.ndarray  # (N, d)


@dataclass(frozen=True)
class IncrementTape:
    fine_dt: float
    n_fine: int
    brownian: np.ndarray
    levy: np.ndarray
    seed: SeedPolicy
    levy_acceptance: float | None = None


def make_tape(problem: SdeProblem, fine_dt: float, seed: SeedPolicy, n_fine: int | None = None) -> IncrementTape:
    """Draw one path's increments at the finest resolution from its Brownian and Levy streams."""
    n = grid_count(problem.horizon, fine_dt) if n_fine is None else int(n_fine)
    if n < 1:
        raise ConfigurationError(f"tape step {fine_dt} leaves no steps before T={problem.horizon}")
    m = problem.brownian_dim
    if m > 0:
        brownian = sample_brownian_increments(problem.noise, fine_dt, n, seed.with_stream(StreamTag.BROWNIAN))
    else:
        brownian = np.zeros((n, 0))
    levy, ratio = draw_levy(problem.noise, fine_dt, n, problem.dim, seed.with_stream(StreamTag.LEVY))
    return IncrementTape(fine_dt, n, brownian, levy, seed, ratio)


def coarsen(tape: IncrementTape, dt: float) -> StepIncrements:
    """Sum consecutive fine increments into steps of length dt; exact, no resampling."""
    k = coarsening_factor(tape.fine_dt, dt)
    if k == 1:
        return StepIncrements(tape.brownian, tape.levy)
    n = tape.n_fine // k
    b = tape.brownian[: n * k].reshape(n, k, tape.brownian.shape[1]).sum(axis=1)
    lv = tape.levy[: n * k].reshape(n, k, tape.levy.shape[1]).sum(axis=1)
    return StepIncrements(b, lv)
