"""
Restricted coefficient grammar for 1-d problems.

A field is a sum of terms ``coef * [(t - a)(b - t)]**p * x**k``. No general
expression evaluation takes place; configs stay auditable.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

import numpy as np

from src.errors import ConfigurationError

_MAX_DENOMINATOR = 1000


def parse_exponent(raw: Any) -> float:
    """Accept a number or a "num/den" string."""
    if isinstance(raw, str):
        try:
            return float(Fraction(raw.strip()))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigurationError(f"invalid exponent {raw!r}") from exc
    try:
        return float(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid exponent {raw!r}") from exc


def parse_power(raw: Any) -> int:
    """An x power: an int, or a float with no fractional part. 1.5 is rejected, never truncated."""
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigurationError(f"x power must be an integer >= 0, got {raw!r}")
    if not float(raw).is_integer() or raw < 0:
        raise ConfigurationError(f"x power must be an integer >= 0, got {raw!r}")
    return int(raw)


def _number(raw: Any, name: str) -> float:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigurationError(f"{name} must be a number, got {raw!r}")
    return float(raw)


@dataclass(frozen=True)
class TimeFactor:
    """[(t - a)(b - t)]**p, with the real odd root for negative bases when p = n/odd."""

    a: float
    b: float
    p: float

    def __post_init__(self) -> None:
        if not self.p >= 0:
            raise ConfigurationError(f"time exponent must be >= 0, got {self.p}")

    @property
    def _odd_root_sign(self) -> int | None:
        frac = Fraction(self.p).limit_denominator(_MAX_DENOMINATOR)
        if abs(float(frac) - self.p) > 1e-12 or frac.denominator % 2 == 0:
            return None
        return -1 if frac.numerator % 2 else 1

    def __call__(self, t: float) -> float:
        u = (t - self.a) * (self.b - t)
        if self.p == 0:
            return 1.0
        magnitude = abs(u) ** self.p
        if u < 0:
            sign = self._odd_root_sign
            if sign is not None:
                return sign * magnitude
        return magnitude

    @property
    def knots(self) -> tuple[float, float]:
        return (self.a, self.b)

    def to_dict(self) -> dict[str, Any]:
        return {"a": self.a, "b": self.b, "exponent": self.p}


@dataclass(frozen=True)
class Term:
    coef: float
    power: int = 0
    time: TimeFactor | None = None

    def __post_init__(self) -> None:
        if int(self.power) != self.power or self.power < 0:
            raise ConfigurationError(f"x power must be an integer >= 0, got {self.power}")

    def time_value(self, t: float) -> float:
        return self.coef * (self.time(t) if self.time is not None else 1.0)

    @classmethod
    def from_mapping(cls, data: Any) -> "Term":
        if not isinstance(data, dict):
            raise ConfigurationError(f"a term must be a mapping, got {data!r}")
        time = data.get("time")
        factor = None
        if time is not None:
            if not isinstance(time, dict):
                raise ConfigurationError(f"time factor must be a mapping, got {time!r}")
            try:
                a, b = _number(time["a"], "time.a"), _number(time["b"], "time.b")
            except KeyError as exc:
                raise ConfigurationError(f"time factor is missing {exc.args[0]!r}") from exc
            factor = TimeFactor(a, b, parse_exponent(time.get("exponent", 1)))
        return cls(coef=_number(data.get("coef", 1.0), "coef"), power=parse_power(data.get("power", 0)), time=factor)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"coef": self.coef, "power": self.power}
        if self.time is not None:
            out["time"] = self.time.to_dict()
        return out


@dataclass(frozen=True)
class PolynomialField:
    terms: tuple[Term, ...]

    def __post_init__(self) -> None:
        if not self.terms:
            raise ConfigurationError("a coefficient field needs at least one term")

    def scalar(self, t: float, x: np.ndarray) -> np.ndarray:
        out = np.zeros_like(x, dtype=float)
        for term in self.terms:
            out = out + term.time_value(t) * x**term.power
        return out

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        """x[..., 1] -> [..., 1]"""
        return self.scalar(t, np.asarray(x, dtype=float)[..., 0])[..., None]

    def derivative(self, t: float, x: np.ndarray) -> np.ndarray:
        """x[..., 1] -> [..., 1, 1]"""
        xs = np.asarray(x, dtype=float)[..., 0]
        out = np.zeros_like(xs)
        for term in self.terms:
            if term.power > 0:
                out = out + term.time_value(t) * term.power * xs ** (term.power - 1)
        return out[..., None, None]

    def matrix(self, t: float, x: np.ndarray) -> np.ndarray:
        """Diffusion form: x[..., 1] -> [..., 1, 1]"""
        return self(t, x)[..., None]

    @property
    def autonomous(self) -> bool:
        return all(term.time is None for term in self.terms)

    @property
    def knots(self) -> tuple[float, ...]:
        points = {k for term in self.terms if term.time is not None for k in term.time.knots}
        return tuple(sorted(p for p in points if math.isfinite(p)))

    @classmethod
    def from_config(cls, raw: Any) -> "PolynomialField":
        if not isinstance(raw, list):
            raise ConfigurationError("a coefficient field must be a list of terms")
        return cls(tuple(Term.from_mapping(item) for item in raw))

    def to_config(self) -> list[dict[str, Any]]:
        return [term.to_dict() for term in self.terms]
