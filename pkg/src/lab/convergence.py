"""
Strong L2 error versus step size, and the fitted convergence order.

Errors are measured against the path computed on the finest grid of the same
increment tape, so the table reports a relative-to-reference error.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import stats

from src.engine.ensemble import DEFAULT_BATCH_SIZE, ErrorMode, simulate_ensemble
from src.engine.tape import coarsening_factor
from src.errors import ConfigurationError
from src.model.constants import AssumptionConstants
from src.model.problem import SdeProblem
from src.noise.seeds import SeedPolicy
from src.noise.spec import NoiseSpec
from src.solver.implicit import DEFAULT_CONFIG, ImplicitStepConfig

log = logging.getLogger(__name__)

MIN_PATHS = 100
MIN_FIT_ROWS = 3
CI_LEVEL = 0.95


@dataclass(frozen=True)
class ErrorRow:
    dt: float
    mse: float
    stderr: float
    n_paths: int

    @property
    def rmse(self) -> float:
        return math.sqrt(self.mse)

    @property
    def rmse_stderr(self) -> float:
        # delta method on sqrt
        return self.stderr / (2.0 * self.rmse) if self.mse > 0 else 0.0

    def to_dict(self) -> dict[str, float]:
        return {
            "dt": self.dt,
            "mse": self.mse,
            "stderr": self.stderr,
            "rmse": self.rmse,
            "rmse_stderr": self.rmse_stderr,
            "n_paths": self.n_paths,
        }


@dataclass(frozen=True)
class ErrorTable:
    rows: tuple[ErrorRow, ...]
    reference_dt: float
    problem: str = ""
    error_mode: str = ErrorMode.TERMINAL.value
    solver: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        dts = [r.dt for r in self.rows]
        if any(b >= a for a, b in zip(dts, dts[1:])):
            raise ConfigurationError("error table rows must have strictly decreasing dt")
        if any(r.mse < 0 for r in self.rows):
            raise ConfigurationError("error table mse must be >= 0")

    def records(self) -> list[dict[str, float]]:
        return [r.to_dict() for r in self.rows]


@dataclass(frozen=True)
class OrderFit:
    slope: float
    intercept: float
    r_squared: float
    slope_ci: tuple[float, float]
    n_rows: int

    @property
    def mse_slope(self) -> float:
        return 2.0 * self.slope

    def to_dict(self) -> dict[str, Any]:
        return {
            "slope": self.slope,
            "mse_slope": self.mse_slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "slope_ci": list(self.slope_ci),
            "n_rows": self.n_rows,
        }


def strong_error_table(
    problem: SdeProblem,
    dt_list: Sequence[float],
    reference_dt: float,
    n_paths: int,
    seed: SeedPolicy,
    cfg: ImplicitStepConfig = DEFAULT_CONFIG,
    workers: int = 1,
    batch_size: int = DEFAULT_BATCH_SIZE,
    error_mode: ErrorMode = ErrorMode.TERMINAL,
) -> ErrorTable:
    if n_paths < MIN_PATHS:
        raise ConfigurationError(f"strong error tables need n_paths >= {MIN_PATHS}, got {n_paths}")
    if problem.noise.heavy_tailed:
        raise ConfigurationError(f"{problem.name}: alpha-stable noise lacks the moments the error table needs")
    dts = sorted({float(dt) for dt in dt_list}, reverse=True)
    if not dts:
        raise ConfigurationError("dt_list is empty")
    for dt in dts:
        coarsening_factor(reference_dt, dt)

    ens = simulate_ensemble(
        problem,
        dts,
        n_paths,
        reference_dt,
        cfg=cfg,
        seed=seed,
        workers=workers,
        batch_size=batch_size,
        error_mode=error_mode,
    )
    rows = tuple(
        ErrorRow(dt=dt, mse=float(ens.errors[dt].mean), stderr=float(ens.errors[dt].stderr), n_paths=n_paths)
        for dt in dts
    )
    for row in rows:
        log.info("[convergence] %s dt=%.3g rmse=%.4e stderr=%.2e", problem.name, row.dt, row.rmse, row.stderr)
    return ErrorTable(rows, reference_dt, problem.name, error_mode.value, ens.stats.to_dict())


def fit_order(table: ErrorTable) -> OrderFit:
    """Least squares of log2(rmse) on log2(dt); rows with zero error are skipped."""
    rows = [r for r in table.rows if r.mse > 0]
    if len(rows) < MIN_FIT_ROWS:
        raise ConfigurationError(f"order fit needs at least {MIN_FIT_ROWS} rows with nonzero error, got {len(rows)}")
    x = np.log2([r.dt for r in rows])
    y = np.log2([r.rmse for r in rows])
    res = stats.linregress(x, y)

    # OLS scatter combined with the propagated Monte Carlo error of each row
    sigma_y = np.array([r.rmse_stderr / (r.rmse * math.log(2.0)) for r in rows])
    weights = (x - x.mean()) / np.sum((x - x.mean()) ** 2)
    propagated = float(np.sqrt(np.sum(weights**2 * sigma_y**2)))
    dof = len(rows) - 2
    t_crit = float(stats.t.ppf(0.5 + CI_LEVEL / 2, dof)) if dof > 0 else math.inf
    z_crit = float(stats.norm.ppf(0.5 + CI_LEVEL / 2))
    ols_part = t_crit * float(res.stderr) if res.stderr > 0 else 0.0
    half = math.hypot(ols_part, z_crit * propagated)

    slope = float(res.slope)
    r_squared = min(1.0, max(0.0, float(res.rvalue) ** 2))
    return OrderFit(slope, float(res.intercept), r_squared, (slope - half, slope + half), len(rows))


def predicted_order(constants: AssumptionConstants, noise: NoiseSpec, has_diffusion: bool) -> float:
    """min(gamma1, gamma2, 1/2) with a Brownian term, min(gamma1, 1/gamma0) without."""
    if constants.gamma1 is None:
        raise ConfigurationError("predicted order needs gamma1")
    if has_diffusion:
        if constants.gamma2 is None:
            raise ConfigurationError("predicted order with diffusion needs gamma2")
        return min(constants.gamma1, constants.gamma2, 0.5)
    return min(constants.gamma1, 1.0 / noise.gamma0)


def order_plot_data(table: ErrorTable, fit: OrderFit, predicted: float | None = None) -> list[dict[str, float]]:
    """Rows of dt, rmse, fitted rmse and guide lines anchored at the coarsest row."""
    rows = [r for r in table.rows if r.mse > 0]
    if not rows:
        return []
    anchor = rows[0]
    out = []
    for r in rows:
        ratio = r.dt / anchor.dt
        point = {
            "dt": r.dt,
            "rmse": r.rmse,
            "fitted": 2.0 ** (fit.intercept + fit.slope * math.log2(r.dt)),
            "guide_half": anchor.rmse * ratio**0.5,
        }
        if predicted is not None:
            point["guide_predicted"] = anchor.rmse * ratio**predicted
        out.append(point)
    return out
