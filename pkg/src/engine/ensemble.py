"""
Path-parallel ensembles of coupled multi-resolution paths.

Paths are simulated in batches of consecutive path indices. Every batch is a
pure function of (problem, seed, path range), so batches may run on any
worker; results are merged in batch order.
"""

import enum
import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from functools import partial, reduce
from typing import Any, TypeVar

import numpy as np
from joblib import Parallel, delayed

from src.errors import ConfigurationError
from src.model.problem import SdeProblem
from src.noise.seeds import SeedPolicy
from src.solver.implicit import DEFAULT_CONFIG, ImplicitStepConfig, SolverStats

from .accumulate import RunningMoments
from .simulate import integrate
from .tape import IncrementTape, coarsen, coarsening_factor, grid_count, make_tape

log = logging.getLogger(__name__)

DEFAULT_BATCH_SIZE = 250

R = TypeVar("R")


class ErrorMode(str, enum.Enum):
    TERMINAL = "terminal"
    MAX_GRID = "max_grid"


# ── Batch plumbing ──────────────────────────────────────────────────────────


def batch_bounds(n_paths: int, batch_size: int) -> list[tuple[int, int]]:
    if n_paths < 1:
        raise ConfigurationError(f"n_paths must be >= 1, got {n_paths}")
    if batch_size < 1:
        raise ConfigurationError(f"batch_size must be >= 1, got {batch_size}")
    return [(s, min(s + batch_size, n_paths)) for s in range(0, n_paths, batch_size)]


def map_batches(func: Callable[[int, int], R], n_paths: int, batch_size: int, workers: int) -> list[R]:
    """Run func(start, stop) over all path batches; results come back in batch order."""
    bounds = batch_bounds(n_paths, batch_size)
    if workers == 1 or len(bounds) == 1:
        return [func(start, stop) for start, stop in bounds]
    return list(Parallel(n_jobs=workers)(delayed(func)(start, stop) for start, stop in bounds))


def batch_tapes(
    problem: SdeProblem, fine_dt: float, seed: SeedPolicy, start: int, stop: int, n_fine: int | None = None
) -> list[IncrementTape]:
    return [make_tape(problem, fine_dt, seed.for_path(i), n_fine) for i in range(start, stop)]


def stack_increments(tapes: Sequence[IncrementTape], dt: float) -> tuple[np.ndarray, np.ndarray]:
    """(B, N, m) Brownian and (B, N, d) Levy increments at resolution dt."""
    steps = [coarsen(tape, dt) for tape in tapes]
    return np.stack([s.brownian for s in steps]), np.stack([s.levy for s in steps])


def initial_batch(problem: SdeProblem, seed: SeedPolicy, start: int, stop: int) -> np.ndarray:
    if callable(problem.x0):
        return np.concatenate([problem.initial_states(1, seed.for_path(i)) for i in range(start, stop)])
    return problem.initial_states(stop - start, seed)


def _acceptance(tapes: Sequence[IncrementTape]) -> list[float]:
    return [t.levy_acceptance for t in tapes if t.levy_acceptance is not None]


# ── Coupled error ensemble ──────────────────────────────────────────────────


@dataclass
class BatchOutcome:
    errors: dict[float, RunningMoments]
    terminal: dict[float, RunningMoments]
    stats: SolverStats
    paths: dict[float, np.ndarray] | None
    acceptance: list[float]


@dataclass
class EnsembleResult:
    problem: str
    fine_dt: float
    dt_list: list[float]
    n_paths: int
    error_mode: ErrorMode
    errors: dict[float, RunningMoments]
    terminal: dict[float, RunningMoments]
    stats: SolverStats
    paths: dict[float, np.ndarray] | None = None
    levy_acceptance: float | None = None
    extra: dict[str, Any] = field(default_factory=dict)


def _reference_steps(n_fine: int, factors: Sequence[int], error_mode: ErrorMode, keep_paths: bool) -> np.ndarray | None:
    """Fine-grid steps the error estimate reads; None keeps the whole reference path."""
    if keep_paths or (error_mode == ErrorMode.MAX_GRID and 1 in factors):
        return None
    steps = {n_fine}
    for k in factors:
        n = n_fine // k
        if error_mode == ErrorMode.MAX_GRID:
            steps.update(range(0, n * k + 1, k))
        else:
            steps.add(n * k)
    return np.array(sorted(steps))


def _ensemble_batch(
    problem: SdeProblem,
    dt_list: Sequence[float],
    fine_dt: float,
    cfg: ImplicitStepConfig,
    seed: SeedPolicy,
    error_mode: ErrorMode,
    keep_paths: bool,
    start: int,
    stop: int,
) -> BatchOutcome:
    tapes = batch_tapes(problem, fine_dt, seed, start, stop)
    n_fine = tapes[0].n_fine
    x0 = initial_batch(problem, seed, start, stop)
    factors = [coarsening_factor(fine_dt, dt) for dt in dt_list]
    ref_steps = _reference_steps(n_fine, factors, error_mode, keep_paths)

    brownian, levy = stack_increments(tapes, fine_dt)
    keep_ref = None if ref_steps is None else list(ref_steps)
    reference, stats = integrate(problem, fine_dt, brownian, levy, x0, cfg, keep=keep_ref)

    def reference_at(steps: np.ndarray | int) -> np.ndarray:
        return reference[:, steps] if ref_steps is None else reference[:, np.searchsorted(ref_steps, steps)]

    errors: dict[float, RunningMoments] = {}
    terminal: dict[float, RunningMoments] = {}
    paths: dict[float, np.ndarray] | None = {} if keep_paths else None
    for dt, k in zip(dt_list, factors):
        n = n_fine // k
        if k == 1:
            coarse = reference
        else:
            keep = None if (error_mode == ErrorMode.MAX_GRID or keep_paths) else [n]
            b, lv = stack_increments(tapes, dt)
            coarse, dt_stats = integrate(problem, dt, b, lv, x0, cfg, keep=keep)
            stats = stats.merge(dt_stats)

        if error_mode == ErrorMode.MAX_GRID:
            diff = reference_at(np.arange(0, n * k + 1, k)) - coarse
            err = np.max(np.sum(diff**2, axis=-1), axis=1)
        else:
            err = np.sum((reference_at(n * k) - coarse[:, -1]) ** 2, axis=-1)

        errors[dt] = RunningMoments()
        errors[dt].add_batch(err)
        terminal[dt] = RunningMoments((problem.dim,))
        terminal[dt].add_batch(coarse[:, -1])
        if paths is not None:
            paths[dt] = coarse
    return BatchOutcome(errors, terminal, stats, paths, _acceptance(tapes))


def simulate_ensemble(
    problem: SdeProblem,
    dt_list: Sequence[float],
    n_paths: int,
    fine_dt: float,
    cfg: ImplicitStepConfig = DEFAULT_CONFIG,
    seed: SeedPolicy | None = None,
    workers: int = 1,
    batch_size: int = DEFAULT_BATCH_SIZE,
    error_mode: ErrorMode = ErrorMode.TERMINAL,
    keep_paths: bool = False,
) -> EnsembleResult:
    """Simulate every path on one tape at all resolutions and accumulate errors against the fine path."""
    seed = seed if seed is not None else SeedPolicy(0)
    dts = [float(dt) for dt in dt_list]
    for dt in dts:
        coarsening_factor(fine_dt, dt)
    if grid_count(problem.horizon, max(dts)) < 1:
        raise ConfigurationError(f"step {max(dts)} exceeds the horizon {problem.horizon}")

    log.info(
        "[ensemble] %s paths=%d dts=%d fine_dt=%.3g workers=%d", problem.name, n_paths, len(dts), fine_dt, workers
    )
    func = partial(_ensemble_batch, problem, dts, fine_dt, cfg, seed, error_mode, keep_paths)
    outcomes = map_batches(func, n_paths, batch_size, workers)

    errors = {dt: reduce(RunningMoments.merge, (o.errors[dt] for o in outcomes)) for dt in dts}
    terminal = {dt: reduce(RunningMoments.merge, (o.terminal[dt] for o in outcomes)) for dt in dts}
    stats = reduce(SolverStats.merge, (o.stats for o in outcomes))
    paths = None
    if keep_paths:
        paths = {dt: np.concatenate([o.paths[dt] for o in outcomes if o.paths is not None]) for dt in dts}
    acceptance = [a for o in outcomes for a in o.acceptance]
    log.info("[ensemble] %s done steps=%d fallbacks=%d", problem.name, stats.steps, stats.fallbacks)
    return EnsembleResult(
        problem=problem.name,
        fine_dt=fine_dt,
        dt_list=dts,
        n_paths=n_paths,
        error_mode=error_mode,
        errors=errors,
        terminal=terminal,
        stats=stats,
        paths=paths,
        levy_acceptance=float(np.mean(acceptance)) if acceptance else None,
    )


# ── Second moments ──────────────────────────────────────────────────────────


@dataclass
class MomentCurve:
    dt: float
    steps: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    envelope: np.ndarray | None

    @property
    def times(self) -> np.ndarray:
        return self.dt * self.steps

    @property
    def within_envelope(self) -> bool | None:
        if self.envelope is None:
            return None
        return bool(np.all(self.mean <= self.envelope + 3.0 * self.stderr))

    def rows(self) -> list[dict[str, float]]:
        env = self.envelope if self.envelope is not None else np.full(self.mean.shape, np.nan)
        return [
            {"step": int(i), "t": float(t), "second_moment": float(m), "stderr": float(s), "envelope": float(e)}
            for i, t, m, s, e in zip(self.steps, self.times, self.mean, self.stderr, env)
        ]


def _moment_batch(
    problem: SdeProblem, dt: float, n_steps: int, cfg: ImplicitStepConfig, seed: SeedPolicy, start: int, stop: int
) -> tuple[RunningMoments, SolverStats]:
    tapes = batch_tapes(problem, dt, seed, start, stop, n_fine=n_steps)
    brownian, levy = stack_increments(tapes, dt)
    states, stats = integrate(problem, dt, brownian, levy, initial_batch(problem, seed, start, stop), cfg)
    moments = RunningMoments((n_steps + 1,))
    moments.add_batch(np.sum(states**2, axis=-1))
    return moments, stats


def second_moment_curve(
    problem: SdeProblem,
    dt: float,
    n_paths: int,
    seed: SeedPolicy | None = None,
    cfg: ImplicitStepConfig = DEFAULT_CONFIG,
    n_steps: int | None = None,
    workers: int = 1,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> MomentCurve:
    """Monte Carlo E|X_i|^2 with the analytic envelope Q1^i E|X_0|^2 + Q2 (1 - Q1^i) / (1 - Q1) when available."""
    seed = seed if seed is not None else SeedPolicy(0)
    n_steps = grid_count(problem.horizon, dt) if n_steps is None else int(n_steps)
    func = partial(_moment_batch, problem, dt, n_steps, cfg, seed)
    outcomes = map_batches(func, n_paths, batch_size, workers)
    moments = reduce(RunningMoments.merge, (m for m, _ in outcomes))

    envelope = None
    c = problem.constants
    if None not in (c.K3, c.K4, c.m1, c.m2):
        ex0sq = float(moments.mean[0])
        envelope = c.moment_envelope(dt, np.arange(n_steps + 1), ex0sq)
    log.info("[moments] %s dt=%.3g paths=%d steps=%d", problem.name, dt, n_paths, n_steps)
    return MomentCurve(dt, np.arange(n_steps + 1), moments.mean, moments.stderr, envelope)
