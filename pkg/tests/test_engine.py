"""Tests for tapes, path marching, ensembles and accumulators."""

import numpy as np
import pytest

from src.engine import (
    CompensatedSum,
    ErrorMode,
    RunningMoments,
    coarsen,
    grid_count,
    integrate,
    make_tape,
    second_moment_curve,
    simulate_ensemble,
    simulate_path,
)
from src.engine.ensemble import _reference_steps, batch_bounds, map_batches
from src.engine.tape import coarsening_factor
from src.errors import ConfigurationError
from src.model import builtin_problem
from src.noise.seeds import SeedPolicy
from tests.conftest import cubic_problem, ou_problem, poisson_noise

# ── grids and tapes ──


def test_grid_count_dyadic():
    assert grid_count(1.0, 2.0**-9) == 512
    assert grid_count(1.0, 0.1) == 10
    assert grid_count(1.0, 0.3) == 3


def test_grid_count_rejects_bad_step():
    with pytest.raises(ConfigurationError):
        grid_count(1.0, 0.0)
    with pytest.raises(ConfigurationError):
        grid_count(1.0, float("inf"))


def test_coarsening_factor():
    assert coarsening_factor(2.0**-12, 2.0**-9) == 8
    with pytest.raises(ConfigurationError):
        coarsening_factor(0.1, 0.25)
    with pytest.raises(ConfigurationError):
        coarsening_factor(0.1, 0.05)


def test_coarsen_is_an_exact_sum(seed):
    problem = cubic_problem(noise=poisson_noise(brownian_dim=1))
    tape = make_tape(problem, 2.0**-6, seed)
    coarse = coarsen(tape, 2.0**-3)
    assert coarse.brownian.shape == (8, 1)
    assert coarse.levy.shape == (8, 1)
    assert np.allclose(coarse.brownian, tape.brownian.reshape(8, 8, 1).sum(axis=1), rtol=0, atol=1e-15)
    assert np.allclose(coarse.levy.sum(), tape.levy.sum())
    assert coarsen(tape, 2.0**-6).brownian is tape.brownian


def test_tape_is_reproducible(seed):
    problem = cubic_problem(noise=poisson_noise(brownian_dim=1))
    a = make_tape(problem, 0.01, seed.for_path(3))
    b = make_tape(problem, 0.01, seed.for_path(3))
    c = make_tape(problem, 0.01, seed.for_path(4))
    assert np.array_equal(a.brownian, b.brownian)
    assert np.array_equal(a.levy, b.levy)
    assert not np.array_equal(a.brownian, c.brownian)


def test_tape_without_brownian(seed):
    tape = make_tape(ou_problem(), 0.1, seed)
    assert tape.brownian.shape == (10, 0)
    assert not tape.levy.any()


# ── marching ──


def test_noise_free_ou_is_geometric():
    theta, dt, x0 = 2.0, 0.05, 3.0
    problem = ou_problem(theta=theta, x0=x0)
    n = grid_count(1.0, dt)
    states, stats = integrate(problem, dt, np.zeros((1, n, 0)), np.zeros((1, n, 1)), np.array([[x0]]))
    expected = x0 * (1.0 / (1.0 + theta * dt)) ** np.arange(n + 1)
    assert np.allclose(states[0, :, 0], expected, rtol=1e-12)
    assert stats.steps == n


def test_ou_with_jumps_matches_recursion(seed):
    theta, dt = 2.0, 0.1
    problem = ou_problem(theta=theta, noise=poisson_noise())
    tape = make_tape(problem, dt, seed)
    path = simulate_path(problem, dt, coarsen(tape, dt))
    y = 1.0
    expected = [y]
    for jump in tape.levy[:, 0]:
        y = (y + jump) / (1.0 + theta * dt)
        expected.append(y)
    assert np.allclose(path.states[:, 0], expected, rtol=1e-12, atol=1e-12)
    assert path.times[-1] == pytest.approx(1.0)
    assert np.array_equal(path.at(0.55), path.states[5])


def test_integrate_keeps_requested_steps():
    problem = ou_problem()
    zeros_b, zeros_l = np.zeros((2, 10, 0)), np.zeros((2, 10, 1))
    full, _ = integrate(problem, 0.1, zeros_b, zeros_l, np.ones((2, 1)))
    kept, _ = integrate(problem, 0.1, zeros_b, zeros_l, np.ones((2, 1)), keep=[10, 0, 5])
    assert kept.shape == (2, 3, 1)
    assert np.array_equal(kept[:, 0], full[:, 10])
    assert np.array_equal(kept[:, 1], full[:, 0])
    assert np.array_equal(kept[:, 2], full[:, 5])


def test_integrate_observer_sees_every_step():
    seen = []
    integrate(ou_problem(), 0.1, np.zeros((1, 4, 0)), np.zeros((1, 4, 1)), np.ones((1, 1)), observer=lambda i, y: seen.append(i))
    assert seen == [1, 2, 3, 4]


def test_integrate_shape_errors():
    problem = cubic_problem()
    with pytest.raises(ConfigurationError):
        integrate(problem, 0.1, np.zeros((1, 4, 1)), np.zeros((1, 5, 1)), np.ones((1, 1)))
    with pytest.raises(ConfigurationError):
        integrate(problem, 0.1, np.zeros((1, 4, 1)), np.zeros((1, 4, 1)), np.ones((1, 1)), keep=[5])


# ── ensembles ──


def _small_ensemble(batch_size: int, workers: int = 1, error_mode: ErrorMode = ErrorMode.TERMINAL):
    problem = cubic_problem(horizon=0.5, noise=poisson_noise(brownian_dim=1))
    return simulate_ensemble(
        problem,
        [2.0**-3, 2.0**-4, 2.0**-6],
        n_paths=24,
        fine_dt=2.0**-6,
        seed=SeedPolicy(77),
        workers=workers,
        batch_size=batch_size,
        error_mode=error_mode,
    )


def test_reference_step_has_zero_error():
    result = _small_ensemble(batch_size=24)
    assert result.errors[2.0**-6].mean == 0.0
    assert result.errors[2.0**-3].mean > 0.0
    assert result.errors[2.0**-3].count == 24


def test_ensemble_is_batch_size_invariant():
    a = _small_ensemble(batch_size=24)
    b = _small_ensemble(batch_size=5)
    for dt in a.dt_list:
        assert np.allclose(a.errors[dt].mean, b.errors[dt].mean, rtol=1e-12, atol=0)
        assert np.allclose(a.terminal[dt].mean, b.terminal[dt].mean, rtol=1e-12, atol=1e-15)


def test_ensemble_is_worker_invariant():
    a = _small_ensemble(batch_size=6, workers=1)
    b = _small_ensemble(batch_size=6, workers=2)
    for dt in a.dt_list:
        assert np.allclose(a.errors[dt].mean, b.errors[dt].mean, rtol=1e-12, atol=0)


def test_max_grid_error_dominates_terminal():
    terminal = _small_ensemble(batch_size=24)
    max_grid = _small_ensemble(batch_size=24, error_mode=ErrorMode.MAX_GRID)
    for dt in terminal.dt_list:
        assert max_grid.errors[dt].mean >= terminal.errors[dt].mean


def test_reference_keeps_only_compared_steps():
    assert _reference_steps(64, [8, 4, 1], ErrorMode.TERMINAL, keep_paths=False).tolist() == [64]
    assert _reference_steps(64, [32, 16], ErrorMode.MAX_GRID, keep_paths=False).tolist() == [0, 16, 32, 48, 64]
    assert _reference_steps(64, [8, 1], ErrorMode.MAX_GRID, keep_paths=False) is None
    assert _reference_steps(64, [8], ErrorMode.TERMINAL, keep_paths=True) is None


def test_trimmed_reference_matches_full_reference():
    problem = cubic_problem(horizon=0.5, noise=poisson_noise(brownian_dim=1))
    common = dict(n_paths=12, fine_dt=2.0**-6, seed=SeedPolicy(78), batch_size=12)
    for mode in (ErrorMode.TERMINAL, ErrorMode.MAX_GRID):
        trimmed = simulate_ensemble(problem, [2.0**-3, 2.0**-4], error_mode=mode, **common)
        full = simulate_ensemble(problem, [2.0**-3, 2.0**-4], error_mode=mode, keep_paths=True, **common)
        for dt in trimmed.dt_list:
            assert trimmed.errors[dt].mean == full.errors[dt].mean
            assert np.array_equal(trimmed.terminal[dt].mean, full.terminal[dt].mean)


def test_ensemble_rejects_incompatible_steps():
    with pytest.raises(ConfigurationError):
        simulate_ensemble(ou_problem(), [0.25], n_paths=4, fine_dt=0.1)
    with pytest.raises(ConfigurationError):
        simulate_ensemble(ou_problem(horizon=0.1), [0.2], n_paths=4, fine_dt=0.1)


def test_batch_bounds_and_order():
    assert batch_bounds(7, 3) == [(0, 3), (3, 6), (6, 7)]
    with pytest.raises(ConfigurationError):
        batch_bounds(0, 3)
    assert map_batches(lambda a, b: (a, b), 7, 3, workers=1) == [(0, 3), (3, 6), (6, 7)]


def test_second_moment_curve_respects_envelope():
    curve = second_moment_curve(builtin_problem("paper-5.4"), 0.01, n_paths=40, seed=SeedPolicy(5), n_steps=60, batch_size=20)
    assert curve.steps.shape == (61,)
    assert curve.mean[0] == pytest.approx(100.0)
    assert curve.envelope is not None
    assert curve.within_envelope
    assert curve.rows()[0]["envelope"] == pytest.approx(100.0)


def test_second_moment_curve_without_constants():
    curve = second_moment_curve(cubic_problem(horizon=0.2), 0.05, n_paths=10, seed=SeedPolicy(5))
    assert curve.envelope is None
    assert curve.within_envelope is None
    assert np.isnan(curve.rows()[0]["envelope"])


# ── accumulators ──


def test_compensated_sum_recovers_cancelled_term():
    acc = CompensatedSum()
    for x in (1e16, 1.0, -1e16):
        acc.add(x)
    assert acc.value == 1.0


def test_compensated_sum_merge():
    a, b = CompensatedSum((2,)), CompensatedSum((2,))
    a.add_batch(np.array([[1e16, 1.0], [1.0, 2.0]]))
    b.add_batch(np.array([[-1e16, 3.0]]))
    assert np.allclose(a.merge(b).value, [1.0, 6.0])


def test_running_moments_merge_matches_single_pass():
    rng = np.random.default_rng(0)
    values = rng.normal(3.0, 2.0, 1000)
    whole = RunningMoments()
    whole.add_batch(values)
    left, right = RunningMoments(), RunningMoments()
    left.add_batch(values[:300])
    right.add_batch(values[300:])
    merged = left.merge(right)
    assert merged.count == 1000
    assert merged.mean == pytest.approx(values.mean(), rel=1e-12)
    assert merged.variance == pytest.approx(values.var(ddof=1), rel=1e-9)
    assert merged.stderr == pytest.approx(values.std(ddof=1) / np.sqrt(1000), rel=1e-9)


def test_running_moments_small_counts():
    empty = RunningMoments()
    assert np.isnan(empty.mean)
    one = RunningMoments()
    one.add_batch(np.array([4.0]))
    assert one.variance == 0.0
