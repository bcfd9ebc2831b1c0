"""
Assumption constants and the quantities derived from them.

Constant groups are optional: a problem declares only the assumptions it
claims. Every provided constant and every relation whose inputs are all
provided is checked on construction.
"""

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import TYPE_CHECKING, Any

import numpy as np

from src.errors import ConfigurationError

if TYPE_CHECKING:
    from src.model.problem import SdeProblem

ORIGIN_GRID = 1000


@dataclass(frozen=True)
class AssumptionConstants:
    # polynomial Lipschitz drift
    H: float | None = None
    sigma: float | None = None
    # Khasminskii-type growth
    q: float | None = None
    M: float | None = None
    # time regularity
    K1: float | None = None
    K2: float | None = None
    gamma1: float | None = None
    gamma2: float | None = None
    # one-sided Lipschitz drift
    K3: float | None = None
    # Lipschitz diffusion
    K4: float | None = None
    # bounds at the origin
    m1: float | None = None
    m2: float | None = None

    def __post_init__(self) -> None:
        for name in ("H", "sigma", "M", "K1", "K2", "K4"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigurationError(f"{name} must be > 0, got {value}")
        for name in ("gamma1", "gamma2"):
            value = getattr(self, name)
            if value is not None and not 0.0 < value < 1.0:
                raise ConfigurationError(f"{name} must lie in (0, 1), got {value}")
        for name in ("m1", "m2"):
            value = getattr(self, name)
            if value is not None and not value >= 0:
                raise ConfigurationError(f"{name} must be >= 0, got {value}")
        if self.K3 is not None and not self.K3 < -0.5:
            raise ConfigurationError(f"K3 must be < -1/2, got {self.K3}")
        if self.K3 is not None and self.K4 is not None and not self.K4 + 2 * self.K3 < -1:
            raise ConfigurationError(f"K4 + 2*K3 must be < -1, got {self.K4 + 2 * self.K3}")
        if self.q is not None and self.sigma is not None and self.q < 2 * self.sigma + 2:
            raise ConfigurationError(f"q must be >= 2*sigma + 2 = {2 * self.sigma + 2}, got {self.q}")

    # ── derived ──

    @property
    def M1(self) -> float:
        return 0.5 + self._need("K3")

    @property
    def M2(self) -> float:
        return self._need("K4")

    def _need(self, name: str) -> float:
        value = getattr(self, name)
        if value is None:
            raise ConfigurationError(f"constant {name} is required here but was not declared")
        return float(value)

    def with_origin_bounds(self, problem: "SdeProblem", n_grid: int = ORIGIN_GRID) -> "AssumptionConstants":
        m1, m2 = estimate_origin_bounds(problem, n_grid)
        return replace(self, m1=m1, m2=m2)

    def moment_factors(self, dt: float) -> tuple[float, float]:
        """(Q1, Q2) of the uniform second-moment bound of the scheme."""
        _check_dt(dt)
        denom = 1.0 - 2.0 * self.M1 * dt
        q1 = (1.0 + self.M2 * dt) / denom
        q2 = (2.0 * self._need("m1") + self._need("m2") + 1.0) * dt / denom
        return q1, q2

    def contraction_factor(self, dt: float) -> float:
        """Q3 of the two-initial-value contraction."""
        _check_dt(dt)
        return (1.0 + self._need("K4") * dt) / (1.0 - 2.0 * self._need("K3") * dt)

    def moment_envelope(self, dt: float, steps: np.ndarray, ex0sq: float) -> np.ndarray:
        q1, q2 = self.moment_factors(dt)
        powers = q1 ** np.asarray(steps, dtype=float)
        limit = q2 / (1.0 - q1)
        # non-increasing in the step even where the decaying term falls below one ulp of the limit
        return np.where(powers == 1.0, ex0sq, limit + powers * (ex0sq - limit))

    def to_dict(self) -> dict[str, Any]:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_mapping(cls, data: Any) -> "AssumptionConstants":
        if not isinstance(data, dict):
            raise ConfigurationError(f"constants must be a mapping, got {data!r}")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown constants: {', '.join(sorted(unknown))}")
        for key, value in data.items():
            if value is not None and (isinstance(value, bool) or not isinstance(value, (int, float))):
                raise ConfigurationError(f"constant {key} must be a number, got {value!r}")
        return cls(**{k: None if v is None else float(v) for k, v in data.items()})


def _check_dt(dt: float) -> None:
    if not 0.0 < dt < 1.0:
        raise ConfigurationError(f"dt must lie in (0, 1), got {dt}")


def estimate_origin_bounds(problem: "SdeProblem", n_grid: int = ORIGIN_GRID) -> tuple[float, float]:
    """m1 = sup_t |f(t,0)|^2 / 2 and m2 = sup_t |g(t,0)|^2 over a uniform t-grid on [0, T]."""
    zero = np.zeros(problem.dim)
    m1 = 0.0
    m2 = 0.0
    for t in np.linspace(0.0, problem.horizon, n_grid):
        f0 = problem.drift(float(t), zero)
        m1 = max(m1, 0.5 * float(np.sum(f0**2)))
        if problem.diffusion is not None:
            g0 = problem.diffusion(float(t), zero)
            m2 = max(m2, float(np.sum(g0**2)))
    if not (math.isfinite(m1) and math.isfinite(m2)):
        raise ConfigurationError(f"{problem.name}: coefficients are not finite at the origin")
    return m1, m2
