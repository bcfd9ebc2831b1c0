"""
Path marching for the drift-implicit Euler-Maruyama scheme

    Y_{i+1} = Y_i + f(t_{i+1}, Y_{i+1}) dt + g(t_i, Y_i) dB_{i+1} + dL_{i+1}

on a uniform grid t_i = i * dt.
"""

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from src.errors import ConfigurationError
from src.model.problem import SdeProblem
from src.solver.implicit import DEFAULT_CONFIG, ImplicitStepConfig, SolverStats, solve_implicit_step

from .tape import StepIncrements

StepObserver = Callable[[int, np.ndarray], None]


@dataclass
class PathResult:
    dt: float
    states: np.ndarray  # (N + 1, d)
    stats: SolverStats

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.states.shape[0])

    def at(self, t: float) -> np.ndarray:
        """Piecewise-constant interpolant Y(t) = Y_i on [t_i, t_{i+1})."""
        i = min(int(np.floor(t / self.dt + 1e-9)), self.states.shape[0] - 1)
        return self.states[i]


def integrate(
    problem: SdeProblem,
    dt: float,
    brownian: np.ndarray,
    levy: np.ndarray,
    x0: np.ndarray,
    cfg: ImplicitStepConfig = DEFAULT_CONFIG,
    keep: Sequence[int] | None = None,
    observer: StepObserver | None = None,
) -> tuple[np.ndarray, SolverStats]:
    """March a batch of paths.

    brownian is (B, N, m), levy is (B, N, d), x0 is (B, d). Returns the states
    at the step indices in ``keep`` (all N + 1 by default) as (B, K, d).
    """
    levy = np.asarray(levy, dtype=float)
    brownian = np.asarray(brownian, dtype=float)
    y = np.array(x0, dtype=float)
    n_paths, n_steps = levy.shape[:2]
    if brownian.shape[:2] != (n_paths, n_steps) or y.shape != (n_paths, problem.dim):
        raise ConfigurationError("increment and initial-state shapes do not match")
    if problem.diffusion is not None and brownian.shape[2] != problem.brownian_dim:
        raise ConfigurationError(f"expected {problem.brownian_dim} Brownian components, got {brownian.shape[2]}")

    wanted = np.arange(n_steps + 1) if keep is None else np.asarray(keep, dtype=int)
    if wanted.size and (wanted.min() < 0 or wanted.max() > n_steps):
        raise ConfigurationError(f"kept step indices must lie in [0, {n_steps}]")
    slots: dict[int, list[int]] = {}
    for pos, step in enumerate(wanted):
        slots.setdefault(int(step), []).append(pos)

    out = np.empty((n_paths, wanted.size, problem.dim))
    for pos in slots.get(0, []):
        out[:, pos] = y

    stats = SolverStats()
    for i in range(n_steps):
        c = y + levy[:, i]
        if problem.diffusion is not None:
            g = problem.diffusion(i * dt, y)
            c = c + (g * brownian[:, i, None, :]).sum(axis=-1)
        y, diag = solve_implicit_step(problem, (i + 1) * dt, c, dt, cfg)
        stats.record(diag, n_paths)
        if observer is not None:
            observer(i + 1, y)
        for pos in slots.get(i + 1, []):
            out[:, pos] = y
    return out, stats


def simulate_path(
    problem: SdeProblem,
    dt: float,
    increments: StepIncrements,
    cfg: ImplicitStepConfig = DEFAULT_CONFIG,
    x0: np.ndarray | None = None,
) -> PathResult:
    if x0 is None and callable(problem.x0):
        raise ConfigurationError(f"{problem.name}: random initial law, pass x0 explicitly")
    start = np.asarray(problem.x0 if x0 is None else x0, dtype=float).reshape(1, problem.dim)
    states, stats = integrate(problem, dt, increments.brownian[None], increments.levy[None], start, cfg)
    return PathResult(dt=dt, states=states[0], stats=stats)
