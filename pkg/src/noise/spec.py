"""
Noise declarations: which Lévy driver an SDE uses, plus its Brownian dimension.

NoiseSpec is immutable and validated on construction; every invalid
combination raises ConfigurationError before any sampling happens.
"""

import enum
import math
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from src.errors import ConfigurationError


class LevyKind(str, enum.Enum):
    NONE = "none"
    ALPHA_STABLE = "alpha_stable"
    TEMPERED_STABLE = "tempered_stable"
    COMPOUND_POISSON = "compound_poisson"


class JumpKind(str, enum.Enum):
    POINT_MASS = "point_mass"
    NORMAL = "normal"
    LAPLACE = "laplace"
    PARETO = "pareto"


@dataclass(frozen=True)
class JumpLaw:
    """Jump size distribution of a compound Poisson driver.

    pareto is symmetric: sign * scale * P with P classical Pareto(tail) on [1, inf),
    so the moment of order gamma exists iff gamma < tail.
    """

    kind: JumpKind
    loc: float = 0.0
    scale: float = 1.0
    tail: float = 0.0

    def __post_init__(self) -> None:
        if self.kind != JumpKind.POINT_MASS and not self.scale > 0:
            raise ConfigurationError(f"jump law scale must be > 0, got {self.scale}")
        if self.kind == JumpKind.PARETO and not self.tail > 0:
            raise ConfigurationError(f"pareto tail must be > 0, got {self.tail}")

    @classmethod
    def point_mass(cls, value: float) -> "JumpLaw":
        return cls(JumpKind.POINT_MASS, loc=value)

    @classmethod
    def normal(cls, mu: float, sd: float) -> "JumpLaw":
        return cls(JumpKind.NORMAL, loc=mu, scale=sd)

    @classmethod
    def laplace(cls, scale: float) -> "JumpLaw":
        return cls(JumpKind.LAPLACE, scale=scale)

    @classmethod
    def pareto(cls, tail: float, scale: float = 1.0) -> "JumpLaw":
        return cls(JumpKind.PARETO, scale=scale, tail=tail)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == JumpKind.POINT_MASS:
            return np.full(size, float(self.loc))
        if self.kind == JumpKind.NORMAL:
            return rng.normal(self.loc, self.scale, size)
        if self.kind == JumpKind.LAPLACE:
            return rng.laplace(self.loc, self.scale, size)
        sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
        return sign * self.scale * (1.0 + rng.pareto(self.tail, size))

    def mean(self) -> float:
        if self.kind == JumpKind.PARETO:
            return 0.0 if self.tail > 1 else math.nan
        return float(self.loc)

    def has_moment(self, gamma: float) -> bool:
        if self.kind == JumpKind.PARETO:
            return gamma < self.tail
        return True

    @classmethod
    def from_mapping(cls, data: Any) -> "JumpLaw":
        if not isinstance(data, dict):
            raise ConfigurationError(f"jump_law must be a mapping, got {data!r}")
        try:
            kind = JumpKind(data["kind"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"unknown jump law: {data.get('kind')!r}") from exc
        return cls(
            kind,
            loc=_float(data.get("loc", data.get("value", 0.0)), "jump_law.loc"),
            scale=_float(data.get("scale", 1.0), "jump_law.scale"),
            tail=_float(data.get("tail", 0.0), "jump_law.tail"),
        )

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "loc": self.loc, "scale": self.scale, "tail": self.tail}


@dataclass(frozen=True)
class NoiseSpec:
    levy_kind: LevyKind = LevyKind.NONE
    alpha: float | None = None
    lam: float | None = None
    scale: float = 1.0
    jump_rate: float | None = None
    jump_law: JumpLaw | None = None
    brownian_dim: int = 0
    gamma0: float = 2.0
    gamma_inf: float = 2.0
    centered: bool = False

    def __post_init__(self) -> None:
        if not 1.0 <= self.gamma0 <= 2.0:
            raise ConfigurationError(f"gamma0 must lie in [1, 2], got {self.gamma0}")
        if not (self.gamma_inf > 1.0 and math.isfinite(self.gamma_inf)):
            raise ConfigurationError(f"gamma_inf must be a finite value > 1, got {self.gamma_inf}")
        if int(self.brownian_dim) != self.brownian_dim or self.brownian_dim < 0:
            raise ConfigurationError(f"brownian_dim must be an integer >= 0, got {self.brownian_dim}")
        if not self.scale > 0:
            raise ConfigurationError(f"noise scale must be > 0, got {self.scale}")

        kind = self.levy_kind
        if kind in (LevyKind.ALPHA_STABLE, LevyKind.TEMPERED_STABLE):
            if self.alpha is None or not 0.0 < self.alpha < 2.0:
                raise ConfigurationError(f"alpha must lie in (0, 2), got {self.alpha}")
        if kind == LevyKind.TEMPERED_STABLE:
            if self.lam is None or not self.lam > 0:
                raise ConfigurationError(f"tempering rate lambda must be > 0, got {self.lam}")
            if self.alpha == 1.0:
                raise ConfigurationError("tempered stable sampling does not support alpha = 1")
        if kind == LevyKind.COMPOUND_POISSON:
            if self.jump_rate is None or not self.jump_rate > 0:
                raise ConfigurationError(f"jump_rate must be > 0, got {self.jump_rate}")
            if self.jump_law is None:
                raise ConfigurationError("compound Poisson noise needs a jump_law")

    @property
    def heavy_tailed(self) -> bool:
        """Pure alpha-stable noise lacks the large-jump moments the convergence theory needs."""
        return self.levy_kind == LevyKind.ALPHA_STABLE

    @property
    def has_levy(self) -> bool:
        return self.levy_kind != LevyKind.NONE

    @classmethod
    def from_mapping(cls, data: Any) -> "NoiseSpec":
        if not isinstance(data, dict):
            raise ConfigurationError(f"a noise block must be a mapping, got {data!r}")
        try:
            kind = LevyKind(data.get("levy_kind", "none"))
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"unknown levy_kind: {data.get('levy_kind')!r}") from exc
        law = data.get("jump_law")
        return cls(
            levy_kind=kind,
            alpha=_opt_float(data.get("alpha"), "alpha"),
            lam=_opt_float(data.get("lambda", data.get("lam")), "lambda"),
            scale=_float(data.get("scale", 1.0), "scale"),
            jump_rate=_opt_float(data.get("jump_rate"), "jump_rate"),
            jump_law=JumpLaw.from_mapping(law) if law is not None else None,
            brownian_dim=_count(data.get("brownian_dim", 0), "brownian_dim"),
            gamma0=_float(data.get("gamma0", 2.0), "gamma0"),
            gamma_inf=_float(data.get("gamma_inf", 2.0), "gamma_inf"),
            centered=_flag(data.get("centered", False), "centered"),
        )

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["levy_kind"] = self.levy_kind.value
        out["lambda"] = out.pop("lam")
        out["jump_law"] = self.jump_law.to_dict() if self.jump_law else None
        return out


def _float(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{name} must be a number, got {value!r}")
    return float(value)


def _opt_float(value: Any, name: str) -> float | None:
    return None if value is None else _float(value, name)


def _count(value: Any, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not float(value).is_integer():
        raise ConfigurationError(f"{name} must be an integer, got {value!r}")
    return int(value)


def _flag(value: Any, name: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigurationError(f"{name} must be true or false, got {value!r}")
    return value
