"""
Empirical assumption probes.

A probe samples random (t, x, y) points inside a ball and counts violations of
one declared inequality. A pass is evidence, not proof.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from src.errors import ConfigurationError
from src.model.problem import SdeProblem
from src.noise.seeds import SeedPolicy, StreamTag

log = logging.getLogger(__name__)

DEFAULT_PAIRS = 10_000
DEFAULT_RADIUS = 5.0
REL_TOL = 1e-9
ABS_TOL = 1e-12


@dataclass(frozen=True)
class ProbeReport:
    name: str
    claimed: dict[str, float]
    n_samples: int
    radius: float
    max_ratio: float
    violations: int
    extra: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "claimed": self.claimed,
            "n_samples": self.n_samples,
            "radius": self.radius,
            "max_ratio": self.max_ratio,
            "violations": self.violations,
            **self.extra,
        }


def _check_args(n: int, radius: float) -> None:
    if int(n) != n or n < 1:
        raise ConfigurationError(f"probe sample count must be >= 1, got {n}")
    if not radius > 0:
        raise ConfigurationError(f"probe radius must be > 0, got {radius}")


def _need(problem: SdeProblem, *names: str) -> list[float]:
    values = []
    for name in names:
        value = getattr(problem.constants, name)
        if value is None:
            raise ConfigurationError(f"{problem.name}: probe needs constant {name}")
        values.append(float(value))
    return values


def _ball(rng: np.random.Generator, n: int, d: int, radius: float) -> np.ndarray:
    if d == 1:
        return rng.uniform(-radius, radius, (n, 1))
    direction = rng.standard_normal((n, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return direction * (radius * rng.random(n) ** (1.0 / d))[:, None]


def _times(rng: np.random.Generator, n: int, horizon: float) -> np.ndarray:
    return rng.uniform(0.0, horizon, n)


def _per_time(fn: Callable[[float, np.ndarray], np.ndarray], ts: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Evaluate a field at per-sample times; coefficient callables take a scalar t."""
    return np.stack([fn(float(t), x) for t, x in zip(ts, xs)])


def _zero_diffusion(problem: SdeProblem) -> Callable[[float, np.ndarray], np.ndarray]:
    if problem.diffusion is not None:
        return problem.diffusion
    return lambda t, x: np.zeros(np.shape(x) + (1,))


def _report(name: str, claimed: dict[str, float], n: int, radius: float, ratios: np.ndarray, bad: np.ndarray, **extra: float) -> ProbeReport:
    finite = ratios[np.isfinite(ratios)]
    report = ProbeReport(
        name=name,
        claimed=claimed,
        n_samples=n,
        radius=radius,
        max_ratio=float(finite.max()) if finite.size else 0.0,
        violations=int(np.count_nonzero(bad)),
        extra=dict(extra),
    )
    log.info("[probe] %s max_ratio=%.6g violations=%d", name, report.max_ratio, report.violations)
    return report


def probe_one_sided_lipschitz(
    problem: SdeProblem, n_pairs: int = DEFAULT_PAIRS, radius: float = DEFAULT_RADIUS, seed: SeedPolicy | None = None
) -> ProbeReport:
    """(x-y)^T (f(t,x) - f(t,y)) <= K3 |x-y|^2."""
    _check_args(n_pairs, radius)
    (k3,) = _need(problem, "K3")
    rng = _rng(seed, 0)
    ts = _times(rng, n_pairs, problem.horizon)
    x = _ball(rng, n_pairs, problem.dim, radius)
    y = _ball(rng, n_pairs, problem.dim, radius)
    fx = _per_time(problem.drift, ts, x)
    fy = _per_time(problem.drift, ts, y)
    dx = x - y
    lhs = np.sum(dx * (fx - fy), axis=1)
    sq = np.sum(dx**2, axis=1)
    scale = np.linalg.norm(dx, axis=1) * (np.linalg.norm(fx, axis=1) + np.linalg.norm(fy, axis=1))
    bad = lhs - k3 * sq > REL_TOL * (1.0 + scale)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = lhs / sq
    return _report("one_sided_lipschitz", {"K3": k3}, n_pairs, radius, ratios, bad & (sq > 0))


def probe_polynomial_lipschitz(
    problem: SdeProblem, n_pairs: int = DEFAULT_PAIRS, radius: float = DEFAULT_RADIUS, seed: SeedPolicy | None = None
) -> ProbeReport:
    """|f(t,x) - f(t,y)|^2 <= H (1 + |x|^sigma + |y|^sigma) |x-y|^2."""
    _check_args(n_pairs, radius)
    h, sigma = _need(problem, "H", "sigma")
    rng = _rng(seed, 1)
    ts = _times(rng, n_pairs, problem.horizon)
    x = _ball(rng, n_pairs, problem.dim, radius)
    y = _ball(rng, n_pairs, problem.dim, radius)
    df = _per_time(problem.drift, ts, x) - _per_time(problem.drift, ts, y)
    lhs = np.sum(df**2, axis=1)
    weight = (1.0 + np.linalg.norm(x, axis=1) ** sigma + np.linalg.norm(y, axis=1) ** sigma) * np.sum((x - y) ** 2, axis=1)
    bad = lhs > h * weight * (1.0 + REL_TOL) + ABS_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = lhs / weight
    return _report("polynomial_lipschitz", {"H": h, "sigma": sigma}, n_pairs, radius, ratios, bad)


def probe_diffusion_lipschitz(
    problem: SdeProblem, n_pairs: int = DEFAULT_PAIRS, radius: float = DEFAULT_RADIUS, seed: SeedPolicy | None = None
) -> ProbeReport:
    """|g(t,x) - g(t,y)|^2 <= K4 |x-y|^2, plus the implied growth |g|^2 <= 2 (K4 |x|^2 + m2)."""
    _check_args(n_pairs, radius)
    (k4,) = _need(problem, "K4")
    g = _zero_diffusion(problem)
    rng = _rng(seed, 2)
    ts = _times(rng, n_pairs, problem.horizon)
    x = _ball(rng, n_pairs, problem.dim, radius)
    y = _ball(rng, n_pairs, problem.dim, radius)
    gx = _per_time(g, ts, x)
    gy = _per_time(g, ts, y)
    lhs = np.sum((gx - gy) ** 2, axis=(1, 2))
    sq = np.sum((x - y) ** 2, axis=1)
    bad = lhs > k4 * sq * (1.0 + REL_TOL) + ABS_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = lhs / sq

    m2 = problem.constants.m2
    if m2 is None:
        g0 = np.stack([g(float(t), np.zeros(problem.dim)) for t in np.linspace(0.0, problem.horizon, 1000)])
        m2 = float(np.max(np.sum(g0**2, axis=(1, 2))))
    growth = np.sum(gx**2, axis=(1, 2))
    growth_bad = growth > 2.0 * (k4 * np.sum(x**2, axis=1) + m2) * (1.0 + REL_TOL) + ABS_TOL
    return _report(
        "diffusion_lipschitz",
        {"K4": k4, "m2": m2},
        n_pairs,
        radius,
        ratios,
        bad | growth_bad,
        growth_violations=float(np.count_nonzero(growth_bad)),
    )


def _time_pairs(rng: np.random.Generator, n: int, problem: SdeProblem) -> tuple[np.ndarray, np.ndarray]:
    """Time pairs with log-uniform gaps; a third of the anchors sit at knots or the interval ends."""
    horizon = problem.horizon
    anchors = np.array(sorted({0.0, horizon, *(k for k in problem.time_knots if 0.0 <= k <= horizon)}))
    t = rng.uniform(0.0, horizon, n)
    at_knot = rng.random(n) < 1.0 / 3.0
    t[at_knot] = anchors[rng.integers(0, anchors.size, int(at_knot.sum()))]
    gap = horizon * 10.0 ** (-8.0 * rng.random(n))
    s = np.clip(t + np.where(rng.random(n) < 0.5, -gap, gap), 0.0, horizon)
    return t, s


def probe_time_holder(
    problem: SdeProblem, n_samples: int = DEFAULT_PAIRS, radius: float = DEFAULT_RADIUS, seed: SeedPolicy | None = None
) -> ProbeReport:
    """|f(s,x) - f(t,x)| <= K1 (1 + |x|^(sigma+1)) |t-s|^gamma1, and the same for g with K2, gamma2."""
    _check_args(n_samples, radius)
    k1, gamma1, sigma = _need(problem, "K1", "gamma1", "sigma")
    rng = _rng(seed, 3)
    t, s = _time_pairs(rng, n_samples, problem)
    x = _ball(rng, n_samples, problem.dim, radius)
    weight = 1.0 + np.linalg.norm(x, axis=1) ** (sigma + 1.0)
    dts = np.abs(t - s)
    keep = dts > 0

    df = np.linalg.norm(_per_time(problem.drift, t, x) - _per_time(problem.drift, s, x), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        drift_ratio = np.where(keep, df / (weight * dts**gamma1), 0.0)
    bad = keep & (drift_ratio > k1 * (1.0 + REL_TOL))
    claimed = {"K1": k1, "gamma1": gamma1}
    extra: dict[str, float] = {"drift_violations": float(np.count_nonzero(bad))}
    ratios = drift_ratio / k1

    if problem.diffusion is not None and problem.constants.K2 is not None:
        k2, gamma2 = _need(problem, "K2", "gamma2")
        dg = _per_time(problem.diffusion, t, x) - _per_time(problem.diffusion, s, x)
        dg_norm = np.sqrt(np.sum(dg**2, axis=(1, 2)))
        with np.errstate(divide="ignore", invalid="ignore"):
            diff_ratio = np.where(keep, dg_norm / (weight * dts**gamma2), 0.0)
        diff_bad = keep & (diff_ratio > k2 * (1.0 + REL_TOL))
        extra["diffusion_violations"] = float(np.count_nonzero(diff_bad))
        claimed.update({"K2": k2, "gamma2": gamma2})
        bad = bad | diff_bad
        ratios = np.maximum(ratios, diff_ratio / k2)
    # max_ratio is relative to the claimed constant here, so 1.0 is the boundary
    return _report("time_holder", claimed, n_samples, radius, ratios, bad, **extra)


def probe_khasminskii(
    problem: SdeProblem, n_pairs: int = DEFAULT_PAIRS, radius: float = DEFAULT_RADIUS, seed: SeedPolicy | None = None
) -> ProbeReport:
    """x^T f(t,x) + (q-1)/2 |g(t,x)|^2 <= M (1 + |x|^2)."""
    _check_args(n_pairs, radius)
    q, m = _need(problem, "q", "M")
    g = _zero_diffusion(problem)
    rng = _rng(seed, 4)
    ts = _times(rng, n_pairs, problem.horizon)
    x = _ball(rng, n_pairs, problem.dim, radius)
    lhs = np.sum(x * _per_time(problem.drift, ts, x), axis=1) + 0.5 * (q - 1.0) * np.sum(_per_time(g, ts, x) ** 2, axis=(1, 2))
    rhs_base = 1.0 + np.sum(x**2, axis=1)
    bad = lhs > m * rhs_base + REL_TOL * np.abs(lhs) + ABS_TOL
    return _report("khasminskii", {"q": q, "M": m}, n_pairs, radius, lhs / rhs_base, bad)


def _rng(seed: SeedPolicy | None, probe_index: int) -> np.random.Generator:
    base = seed if seed is not None else SeedPolicy(0)
    return base.for_path(base.path_index + probe_index).with_stream(StreamTag.PROBE).generator()


PROBES: dict[str, Callable[..., ProbeReport]] = {
    "polynomial_lipschitz": probe_polynomial_lipschitz,
    "khasminskii": probe_khasminskii,
    "time_holder": probe_time_holder,
    "one_sided_lipschitz": probe_one_sided_lipschitz,
    "diffusion_lipschitz": probe_diffusion_lipschitz,
}


def run_declared_probes(
    problem: SdeProblem, n_pairs: int = DEFAULT_PAIRS, radius: float = DEFAULT_RADIUS, seed: SeedPolicy | None = None
) -> list[ProbeReport]:
    return [PROBES[name](problem, n_pairs, radius, seed) for name in problem.probes]
