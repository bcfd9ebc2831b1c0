"""Tests for strong error tables and order fits."""

import math

import pytest

from src.errors import ConfigurationError
from src.lab.convergence import (
    ErrorRow,
    ErrorTable,
    fit_order,
    order_plot_data,
    predicted_order,
    strong_error_table,
)
from src.model import builtin_problem
from src.noise.seeds import SeedPolicy
from src.noise.spec import LevyKind, NoiseSpec
from tests.conftest import cubic_problem, ou_problem


def _table(order: float, dts=(2.0**-3, 2.0**-4, 2.0**-5, 2.0**-6), stderr: float = 0.0) -> ErrorTable:
    rows = tuple(ErrorRow(dt=dt, mse=dt ** (2.0 * order), stderr=stderr, n_paths=1000) for dt in dts)
    return ErrorTable(rows, reference_dt=2.0**-9)


def test_fit_recovers_synthetic_slope():
    fit = fit_order(_table(0.5))
    assert fit.slope == pytest.approx(0.5, abs=1e-12)
    assert fit.mse_slope == pytest.approx(1.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.slope_ci[0] <= 0.5 <= fit.slope_ci[1]
    assert fit.n_rows == 4


def test_fit_ci_widens_with_monte_carlo_error():
    exact = fit_order(_table(0.3))
    noisy = fit_order(_table(0.3, stderr=1e-3))
    assert noisy.slope == pytest.approx(exact.slope)
    exact_width = exact.slope_ci[1] - exact.slope_ci[0]
    noisy_width = noisy.slope_ci[1] - noisy.slope_ci[0]
    assert noisy_width > exact_width


def test_fit_skips_zero_rows_and_needs_three():
    rows = _table(0.5).rows[:3] + (ErrorRow(dt=2.0**-9, mse=0.0, stderr=0.0, n_paths=1000),)
    assert fit_order(ErrorTable(rows, reference_dt=2.0**-9)).n_rows == 3
    with pytest.raises(ConfigurationError):
        fit_order(ErrorTable(_table(0.5).rows[:2], reference_dt=2.0**-9))


def test_table_validation():
    with pytest.raises(ConfigurationError):
        ErrorTable(tuple(reversed(_table(0.5).rows)), reference_dt=2.0**-9)
    with pytest.raises(ConfigurationError):
        ErrorTable((ErrorRow(0.1, -1.0, 0.0, 100),), reference_dt=0.01)


def test_error_row_rmse_and_stderr():
    row = ErrorRow(dt=0.1, mse=0.04, stderr=0.004, n_paths=100)
    assert row.rmse == pytest.approx(0.2)
    assert row.rmse_stderr == pytest.approx(0.01)
    assert ErrorRow(dt=0.1, mse=0.0, stderr=0.0, n_paths=100).rmse_stderr == 0.0
    assert set(row.to_dict()) == {"dt", "mse", "stderr", "rmse", "rmse_stderr", "n_paths"}


@pytest.mark.parametrize(
    "name,expected",
    [
        ("paper-5.1a", 0.2),
        ("paper-5.1b", 0.2),
        ("paper-5.1c", 0.5),
        ("paper-5.2", 1.0 / 1.3),
    ],
)
def test_predicted_orders_of_builtins(name, expected):
    problem = builtin_problem(name)
    assert predicted_order(problem.constants, problem.noise, problem.has_diffusion) == pytest.approx(expected)


def test_predicted_order_needs_exponents():
    problem = ou_problem()
    with pytest.raises(ConfigurationError):
        predicted_order(problem.constants, problem.noise, False)


def test_order_plot_data_anchors_guides():
    table = _table(0.25)
    points = order_plot_data(table, fit_order(table), predicted=0.25)
    assert len(points) == 4
    first, last = points[0], points[-1]
    assert first["guide_half"] == pytest.approx(first["rmse"])
    assert last["guide_half"] == pytest.approx(first["rmse"] * (1.0 / 8.0) ** 0.5)
    for p in points:
        assert p["fitted"] == pytest.approx(p["rmse"])
        assert p["guide_predicted"] == pytest.approx(p["rmse"])


def test_order_plot_data_without_nonzero_rows():
    table = ErrorTable((ErrorRow(0.1, 0.0, 0.0, 100),), reference_dt=0.1)
    fit = fit_order(_table(0.5))
    assert order_plot_data(table, fit) == []


def test_error_table_refuses_heavy_tails():
    noise = NoiseSpec(levy_kind=LevyKind.ALPHA_STABLE, alpha=1.5)
    with pytest.raises(ConfigurationError, match="alpha-stable"):
        strong_error_table(ou_problem(noise=noise), [0.1], 0.05, n_paths=100, seed=SeedPolicy(1))


def test_error_table_refuses_few_paths():
    with pytest.raises(ConfigurationError, match="n_paths"):
        strong_error_table(cubic_problem(), [0.1], 0.05, n_paths=99, seed=SeedPolicy(1))


def test_error_table_refuses_off_grid_steps():
    with pytest.raises(ConfigurationError):
        strong_error_table(cubic_problem(), [0.3, 0.1], 0.04, n_paths=100, seed=SeedPolicy(1))


def test_small_cubic_run_converges():
    table = strong_error_table(
        cubic_problem(horizon=0.5),
        [2.0**-5, 2.0**-3, 2.0**-4],
        reference_dt=2.0**-7,
        n_paths=100,
        seed=SeedPolicy(2024),
        batch_size=50,
    )
    assert [r.dt for r in table.rows] == [2.0**-3, 2.0**-4, 2.0**-5]
    assert table.rows[0].rmse > table.rows[-1].rmse > 0
    assert table.problem == "cubic-test"
    fit = fit_order(table)
    assert fit.slope > 0.2
    assert math.isfinite(fit.slope_ci[0])
