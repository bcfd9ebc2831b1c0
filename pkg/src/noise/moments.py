"""
Closed-form admissibility checks of the Lévy measure against the small-jump
(gamma0) and large-jump (gamma_inf) moment conditions.
"""

import enum
import math
from dataclasses import dataclass
from typing import Any

from scipy import integrate, special

from src.noise.spec import LevyKind, NoiseSpec


class ConditionStatus(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    BORDERLINE = "borderline"


@dataclass(frozen=True)
class MomentCondition:
    name: str
    exponent: float
    status: ConditionStatus
    value: float | None
    reason: str

    @property
    def passed(self) -> bool:
        return self.status != ConditionStatus.FAIL

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "exponent": self.exponent,
            "status": self.status.value,
            "value": self.value,
            "reason": self.reason,
        }


@dataclass(frozen=True)
class MomentReport:
    levy_kind: LevyKind
    conditions: tuple[MomentCondition, ...]
    heavy_tailed: bool

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    @property
    def admissible_for_convergence(self) -> bool:
        return self.passed and not self.heavy_tailed

    def to_dict(self) -> dict[str, Any]:
        return {
            "levy_kind": self.levy_kind.value,
            "passed": self.passed,
            "heavy_tailed": self.heavy_tailed,
            "admissible_for_convergence": self.admissible_for_convergence,
            "conditions": [c.to_dict() for c in self.conditions],
        }


def levy_measure_constant(alpha: float, scale: float) -> float:
    """C such that C|z|^(-1-alpha) is the Lévy density of a symmetric stable with this scale."""
    if alpha == 1.0:
        return scale / math.pi
    return scale**alpha / (-2.0 * special.gamma(-alpha) * math.cos(math.pi * alpha / 2))


def _upper_incomplete(s: float, x: float) -> float:
    """Gamma(s, x) for s > 0."""
    return float(special.gamma(s) * special.gammaincc(s, x))


def _lower_incomplete(s: float, x: float) -> float:
    """gamma(s, x) for s > 0."""
    return float(special.gamma(s) * special.gammainc(s, x))


def _small_stable(spec: NoiseSpec, c: float) -> MomentCondition:
    alpha, g0 = spec.alpha, spec.gamma0
    assert alpha is not None
    name = "small_jumps"
    if g0 < alpha:
        return MomentCondition(name, g0, ConditionStatus.FAIL, None, f"gamma0={g0} < alpha={alpha}: integral diverges")
    if g0 == alpha:
        return MomentCondition(
            name,
            g0,
            ConditionStatus.BORDERLINE,
            None,
            f"gamma0 = alpha = {alpha}: log-divergent, holds for every gamma0 > alpha; treated as admissible",
        )
    if spec.levy_kind == LevyKind.ALPHA_STABLE:
        value = 2.0 * c / (g0 - alpha)
    else:
        lam = spec.lam
        assert lam is not None
        s = g0 - alpha
        value = 2.0 * c * lam ** (-s) * _lower_incomplete(s, lam)
    return MomentCondition(name, g0, ConditionStatus.PASS, value, "finite")


def _large_stable(spec: NoiseSpec, c: float) -> MomentCondition:
    alpha, gi = spec.alpha, spec.gamma_inf
    assert alpha is not None
    name = "large_jumps"
    if spec.levy_kind == LevyKind.ALPHA_STABLE:
        if gi >= alpha:
            return MomentCondition(name, gi, ConditionStatus.FAIL, None, f"heavy tail: gamma_inf={gi} >= alpha={alpha}")
        return MomentCondition(name, gi, ConditionStatus.PASS, 2.0 * c / (alpha - gi), "finite")

    lam = spec.lam
    assert lam is not None
    s = gi - alpha
    if s > 0:
        value = 2.0 * c * lam ** (-s) * _upper_incomplete(s, lam)
    else:
        value, _ = integrate.quad(lambda z: z ** (s - 1.0) * math.exp(-lam * z), 1.0, math.inf)
        value *= 2.0 * c
    return MomentCondition(name, gi, ConditionStatus.PASS, float(value), "exponential tempering: all moments finite")


def validate_moment_conditions(spec: NoiseSpec) -> MomentReport:
    kind = spec.levy_kind
    if kind == LevyKind.NONE:
        conditions = (
            MomentCondition("small_jumps", spec.gamma0, ConditionStatus.PASS, 0.0, "empty Lévy measure"),
            MomentCondition("large_jumps", spec.gamma_inf, ConditionStatus.PASS, 0.0, "empty Lévy measure"),
        )
    elif kind == LevyKind.COMPOUND_POISSON:
        law = spec.jump_law
        assert law is not None
        small = MomentCondition(
            "small_jumps", spec.gamma0, ConditionStatus.PASS, None, "finite activity: total mass equals the jump rate"
        )
        if law.has_moment(spec.gamma_inf):
            large = MomentCondition("large_jumps", spec.gamma_inf, ConditionStatus.PASS, None, "jump law moment exists")
        else:
            large = MomentCondition(
                "large_jumps",
                spec.gamma_inf,
                ConditionStatus.FAIL,
                None,
                f"{law.kind.value} jumps have no moment of order {spec.gamma_inf}",
            )
        conditions = (small, large)
    else:
        assert spec.alpha is not None
        c = levy_measure_constant(spec.alpha, spec.scale)
        conditions = (_small_stable(spec, c), _large_stable(spec, c))
    return MomentReport(levy_kind=kind, conditions=conditions, heavy_tailed=spec.heavy_tailed)
