"""
Statistical self-validation of the configured noise samplers.

Each check compares a sampler against a known closed form (or a monotone
trend) with an explicit Monte Carlo tolerance; the report is JSON-ready.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import stats

from src.noise.samplers import (
    sample_alpha_stable,
    sample_brownian_increments,
    sample_compound_poisson,
    sample_tempered_stable,
)
from src.noise.seeds import SeedPolicy
from src.noise.spec import LevyKind, NoiseSpec

log = logging.getLogger(__name__)

ECF_GRID = (0.25, 0.5, 1.0, 2.0)
TEMPERING_GRID = (0.5, 1.0, 2.0, 4.0)
KS_LEVEL = 0.01


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    statistic: float
    tolerance: float
    detail: str = ""

    def __post_init__(self) -> None:
        # plain Python scalars only, so reports stay json-encodable
        object.__setattr__(self, "passed", bool(self.passed))
        object.__setattr__(self, "statistic", float(self.statistic))
        object.__setattr__(self, "tolerance", float(self.tolerance))

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "statistic": self.statistic,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }


@dataclass
class SelfCheckReport:
    levy_kind: LevyKind
    n: int
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict[str, Any]:
        return {
            "levy_kind": self.levy_kind.value,
            "n": self.n,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
        }


def check_brownian(n: int, seed: SeedPolicy) -> CheckResult:
    x = sample_brownian_increments(NoiseSpec(brownian_dim=1), 1.0, n, seed)[:, 0]
    mean_tol = 4.0 / math.sqrt(n)
    var_tol = max(0.01, 6.0 * math.sqrt(2.0 / n))
    mean, var = float(x.mean()), float(x.var(ddof=1))
    ok = abs(mean) <= mean_tol and abs(var - 1.0) <= var_tol
    return CheckResult("brownian_moments", ok, abs(var - 1.0), var_tol, f"mean={mean:.3e} var={var:.5f}")


def check_characteristic_function(alpha: float, scale: float, n: int, seed: SeedPolicy) -> CheckResult:
    x = sample_alpha_stable(alpha, scale, 1.0, n, seed)
    worst = 0.0
    ok = True
    for t in ECF_GRID:
        c = np.cos(t * x)
        stderr = float(c.std(ddof=1)) / math.sqrt(n)
        gap = abs(float(c.mean()) - math.exp(-abs(scale * t) ** alpha))
        ok = ok and gap <= 3.0 * stderr
        worst = max(worst, gap / stderr if stderr > 0 else 0.0)
    return CheckResult("stable_ecf", ok, worst, 3.0, "max |ecf gap| in stderr units")


def check_gaussian_reduction(n: int, seed: SeedPolicy) -> CheckResult:
    x = sample_alpha_stable(2.0, 1.0 / math.sqrt(2.0), 1.0, n, seed)
    ref = seed.for_path(seed.path_index + 1).generator().standard_normal(n)
    res = stats.ks_2samp(x, ref)
    return CheckResult("alpha2_gaussian_ks", bool(res.pvalue > KS_LEVEL), float(res.statistic), KS_LEVEL, f"p={res.pvalue:.4f}")


def check_tempering_monotonicity(alpha: float, scale: float, n: int, seed: SeedPolicy) -> CheckResult:
    fourth: list[tuple[float, float]] = []
    for j, lam in enumerate(TEMPERING_GRID):
        x = sample_tempered_stable(alpha, lam, scale, 1.0, n, seed.for_path(seed.path_index + j)).values
        x4 = x**4
        fourth.append((float(x4.mean()), float(x4.std(ddof=1)) / math.sqrt(n)))
    ok = True
    for (m_a, se_a), (m_b, se_b) in zip(fourth, fourth[1:]):
        ok = ok and m_b < m_a + 3.0 * math.hypot(se_a, se_b)
    detail = " ".join(f"{m:.4g}" for m, _ in fourth)
    return CheckResult("tempering_fourth_moment", ok, fourth[-1][0], fourth[0][0], f"E[X^4] over lambda: {detail}")


def check_wald(spec: NoiseSpec, n: int, seed: SeedPolicy) -> CheckResult:
    rate, law = spec.jump_rate, spec.jump_law
    assert rate is not None and law is not None
    x = sample_compound_poisson(rate, law, 1.0, n, seed, centered=spec.centered)
    expected = 0.0 if spec.centered else rate * law.mean()
    stderr = float(x.std(ddof=1)) / math.sqrt(n)
    gap = abs(float(x.mean()) - expected)
    return CheckResult("compound_poisson_wald", gap <= 3.0 * stderr, gap, 3.0 * stderr, f"expected mean {expected:.6g}")


def sampler_self_check(spec: NoiseSpec, n: int, seed: SeedPolicy) -> SelfCheckReport:
    """Run the checks that apply to the configured noise family."""
    report = SelfCheckReport(levy_kind=spec.levy_kind, n=n)
    if spec.brownian_dim > 0:
        report.checks.append(check_brownian(n, seed.for_path(0)))
    if spec.levy_kind in (LevyKind.ALPHA_STABLE, LevyKind.TEMPERED_STABLE):
        assert spec.alpha is not None
        report.checks.append(check_characteristic_function(spec.alpha, spec.scale, n, seed.for_path(10)))
        report.checks.append(check_gaussian_reduction(n, seed.for_path(20)))
    if spec.levy_kind == LevyKind.TEMPERED_STABLE:
        assert spec.alpha is not None
        report.checks.append(check_tempering_monotonicity(spec.alpha, spec.scale, n, seed.for_path(30)))
    if spec.levy_kind == LevyKind.COMPOUND_POISSON:
        report.checks.append(check_wald(spec, n, seed.for_path(40)))
    for check in report.checks:
        log.info("[selfcheck] %s passed=%s stat=%.4g", check.name, check.passed, check.statistic)
    return report
