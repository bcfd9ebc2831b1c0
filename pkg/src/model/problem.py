"""
SDE problem declaration.

Coefficient callables are vectorised over leading batch axes:
    drift(t, x[..., d])          -> [..., d]
    diffusion(t, x[..., d])      -> [..., d, m]
    drift_jacobian(t, x[..., d]) -> [..., d, d]
"""

from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from src.errors import ConfigurationError
from src.model.constants import AssumptionConstants
from src.noise.seeds import SeedPolicy, StreamTag
from src.noise.spec import NoiseSpec

Field = Callable[[float, np.ndarray], np.ndarray]
InitialSampler = Callable[[np.random.Generator, int], np.ndarray]

FD_REL_STEP = 1e-6


def finite_difference_jacobian(drift: Field, t: float, x: np.ndarray) -> np.ndarray:
    """Central differences with step h = (1 + |x_j|) * 1e-6 per component."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    jac = np.empty(x.shape + (d,))
    for j in range(d):
        h = (1.0 + np.abs(x[..., j])) * FD_REL_STEP
        up = x.copy()
        down = x.copy()
        up[..., j] += h
        down[..., j] -= h
        jac[..., :, j] = (drift(t, up) - drift(t, down)) / (2.0 * h)[..., None]
    return jac


@dataclass(frozen=True)
class SdeProblem:
    name: str
    dim: int
    drift: Field
    noise: NoiseSpec
    x0: np.ndarray | InitialSampler
    horizon: float
    diffusion: Field | None = None
    drift_jacobian: Field | None = None
    constants: AssumptionConstants = field(default_factory=AssumptionConstants)
    probes: tuple[str, ...] = ()
    # times where coefficients may lose regularity, e.g. roots of time factors
    time_knots: tuple[float, ...] = ()
    autonomous: bool = False
    description: str = ""

    def __post_init__(self) -> None:
        if int(self.dim) != self.dim or self.dim < 1:
            raise ConfigurationError(f"{self.name}: dim must be an integer >= 1, got {self.dim}")
        if not self.horizon > 0:
            raise ConfigurationError(f"{self.name}: horizon must be > 0, got {self.horizon}")
        if self.diffusion is None and self.noise.brownian_dim > 0:
            raise ConfigurationError(f"{self.name}: brownian_dim > 0 needs a diffusion coefficient")
        if self.diffusion is not None and self.noise.brownian_dim == 0:
            raise ConfigurationError(f"{self.name}: a diffusion coefficient needs brownian_dim >= 1")
        if not callable(self.x0):
            x0 = np.asarray(self.x0, dtype=float).reshape(-1)
            if x0.shape != (self.dim,):
                raise ConfigurationError(f"{self.name}: x0 must have {self.dim} components, got {x0.size}")
            object.__setattr__(self, "x0", x0)

    @property
    def brownian_dim(self) -> int:
        return self.noise.brownian_dim

    @property
    def has_diffusion(self) -> bool:
        return self.diffusion is not None

    def jacobian(self, t: float, x: np.ndarray) -> np.ndarray:
        if self.drift_jacobian is not None:
            return self.drift_jacobian(t, x)
        return finite_difference_jacobian(self.drift, t, x)

    def initial_states(self, n: int, seed: SeedPolicy) -> np.ndarray:
        """(n, dim) initial states; random initial laws use the Initial stream of ``seed``."""
        if callable(self.x0):
            rng = seed.with_stream(StreamTag.INITIAL).generator()
            states = np.asarray(self.x0(rng, n), dtype=float).reshape(n, self.dim)
            return states
        return np.broadcast_to(self.x0, (n, self.dim)).copy()

    def summary(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "dim": self.dim,
            "horizon": self.horizon,
            "x0": None if callable(self.x0) else self.x0.tolist(),
            "noise": self.noise.to_dict(),
            "constants": self.constants.to_dict(),
            "probes": list(self.probes),
            "description": self.description,
        }
