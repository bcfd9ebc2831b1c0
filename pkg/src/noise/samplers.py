"""
Increment samplers for the Brownian and Lévy drivers.

All samplers are pure functions of their arguments and a SeedPolicy; calling
one twice with the same inputs returns identical arrays.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from src.errors import ConfigurationError
from src.noise.seeds import SeedPolicy
from src.noise.spec import JumpLaw, LevyKind, NoiseSpec

log = logging.getLogger(__name__)

# Left-tail mass discarded by the tempered sampler for alpha > 1.
_LEFT_TAIL_MASS = 1e-9


def _check_grid(dt: float, n: int) -> None:
    if not (dt > 0 and math.isfinite(dt)):
        raise ConfigurationError(f"dt must be a finite value > 0, got {dt}")
    if int(n) != n or n < 1:
        raise ConfigurationError(f"n must be an integer >= 1, got {n}")


def _check_alpha(alpha: float, upper_inclusive: bool = False) -> None:
    ok = 0.0 < alpha <= 2.0 if upper_inclusive else 0.0 < alpha < 2.0
    if not ok:
        raise ConfigurationError(f"alpha must lie in (0, 2), got {alpha}")


# ── Brownian ────────────────────────────────────────────────────────────────


def sample_brownian_increments(spec: NoiseSpec, dt: float, n: int, seed: SeedPolicy) -> np.ndarray:
    """Return an (n, brownian_dim) array of N(0, dt) increments."""
    _check_grid(dt, n)
    rng = seed.generator()
    return rng.standard_normal((int(n), spec.brownian_dim)) * math.sqrt(dt)


# ── Stable ──────────────────────────────────────────────────────────────────


def _symmetric_stable(rng: np.random.Generator, alpha: float, size: int) -> np.ndarray:
    """Chambers-Mallows-Stuck draw of a standard symmetric stable, E[exp(itX)] = exp(-|t|^alpha)."""
    phi = rng.uniform(-math.pi / 2, math.pi / 2, size)
    w = rng.standard_exponential(size)
    if alpha == 1.0:
        return np.tan(phi)
    if alpha == 2.0:
        return 2.0 * np.sqrt(w) * np.sin(phi)
    return (
        np.sin(alpha * phi)
        / np.cos(phi) ** (1.0 / alpha)
        * (np.cos((1.0 - alpha) * phi) / w) ** ((1.0 - alpha) / alpha)
    )


def _positive_stable(rng: np.random.Generator, alpha: float, size: int) -> np.ndarray:
    """Totally skewed (beta = 1) standard stable, alpha != 1."""
    tan_term = math.tan(math.pi * alpha / 2)
    b = math.atan(tan_term) / alpha
    s = (1.0 + tan_term**2) ** (1.0 / (2.0 * alpha))
    v = rng.uniform(-math.pi / 2, math.pi / 2, size)
    w = rng.standard_exponential(size)
    return (
        s
        * np.sin(alpha * (v + b))
        / np.cos(v) ** (1.0 / alpha)
        * (np.cos(v - alpha * (v + b)) / w) ** ((1.0 - alpha) / alpha)
    )


def sample_alpha_stable(alpha: float, scale: float, dt: float, n: int, seed: SeedPolicy) -> np.ndarray:
    """Symmetric alpha-stable increments with scale ``scale * dt**(1/alpha)``.

    alpha = 2 is accepted and gives N(0, 2 * scale**2 * dt).
    """
    _check_alpha(alpha, upper_inclusive=True)
    if not scale > 0:
        raise ConfigurationError(f"scale must be > 0, got {scale}")
    _check_grid(dt, n)
    rng = seed.generator()
    return scale * dt ** (1.0 / alpha) * _symmetric_stable(rng, alpha, int(n))


# ── Tempered stable ─────────────────────────────────────────────────────────


@dataclass(frozen=True)
class TemperedDraw:
    values: np.ndarray
    proposals: int
    accepted: int
    pieces: int

    @property
    def acceptance_ratio(self) -> float:
        return self.accepted / self.proposals if self.proposals else 1.0


@lru_cache(maxsize=64)
def _left_truncation(alpha: float) -> float:
    """Point c with P(X < -c) <= _LEFT_TAIL_MASS for the standard one-sided stable.

    Chernoff bound on E[exp(-sX)] = exp(s**alpha / |cos(pi alpha / 2)|), alpha in (1, 2).
    """
    if alpha < 1.0:
        return 0.0
    cos_term = abs(math.cos(math.pi * alpha / 2))
    log_mass = -math.log(_LEFT_TAIL_MASS)
    base = log_mass * alpha / (alpha - 1.0) * (alpha / cos_term) ** (1.0 / (alpha - 1.0))
    return base ** ((alpha - 1.0) / alpha)


def _piece_count(alpha: float, lam: float, half_scale: float, dt: float) -> int:
    rate = dt * (lam * half_scale) ** alpha
    if alpha > 1.0:
        factor = _left_truncation(alpha) ** alpha
    else:
        factor = 1.0 / math.cos(math.pi * alpha / 2)
    return max(1, math.ceil(rate * factor))


def _tilted_one_sided(
    rng: np.random.Generator, alpha: float, lam: float, piece_scale: float, shift: float, count: int
) -> tuple[np.ndarray, int]:
    """Exponentially tilted one-sided stable draws via rejection on exp(-lam (x + shift))."""
    out = np.empty(count)
    filled = 0
    proposals = 0
    while filled < count:
        want = count - filled
        x = piece_scale * _positive_stable(rng, alpha, want)
        u = rng.random(want)
        proposals += want
        keep = (x > -shift) & (u <= np.exp(-lam * (x + shift)))
        got = x[keep]
        out[filled : filled + got.size] = got
        filled += got.size
    return out, proposals


def sample_tempered_stable(
    alpha: float, lam: float, scale: float, dt: float, n: int, seed: SeedPolicy
) -> TemperedDraw:
    """Symmetric tempered stable increments over a step of length dt.

    The increment is the difference of two independent one-sided tilted stable
    variables of scale ``scale * 2**(-1/alpha)``, so lam -> 0 recovers the
    symmetric stable law of scale ``scale``. Each side is split into m pieces so
    that every rejection step accepts with probability bounded below.
    """
    _check_alpha(alpha)
    if alpha == 1.0:
        raise ConfigurationError("tempered stable sampling does not support alpha = 1")
    if not lam > 0:
        raise ConfigurationError(f"tempering rate lambda must be > 0, got {lam}")
    if not scale > 0:
        raise ConfigurationError(f"scale must be > 0, got {scale}")
    _check_grid(dt, n)

    n = int(n)
    half_scale = scale * 2.0 ** (-1.0 / alpha)
    pieces = _piece_count(alpha, lam, half_scale, dt)
    piece_scale = half_scale * (dt / pieces) ** (1.0 / alpha)
    shift = _left_truncation(alpha) * piece_scale

    rng = seed.generator()
    pos, prop_pos = _tilted_one_sided(rng, alpha, lam, piece_scale, shift, n * pieces)
    neg, prop_neg = _tilted_one_sided(rng, alpha, lam, piece_scale, shift, n * pieces)
    values = pos.reshape(n, pieces).sum(axis=1) - neg.reshape(n, pieces).sum(axis=1)

    proposals = prop_pos + prop_neg
    accepted = 2 * n * pieces
    log.debug("[tempered] alpha=%s lam=%s pieces=%d acceptance=%.3f", alpha, lam, pieces, accepted / proposals)
    return TemperedDraw(values=values, proposals=proposals, accepted=accepted, pieces=pieces)


# ── Compound Poisson ────────────────────────────────────────────────────────


def sample_compound_poisson(
    rate: float,
    jump_law: JumpLaw,
    dt: float,
    n: int,
    seed: SeedPolicy,
    centered: bool = False,
    gamma_inf: float | None = None,
) -> np.ndarray:
    if not rate > 0:
        raise ConfigurationError(f"jump rate must be > 0, got {rate}")
    if gamma_inf is not None and not jump_law.has_moment(gamma_inf):
        raise ConfigurationError(f"jump law {jump_law.kind.value} has no moment of order {gamma_inf}")
    _check_grid(dt, n)

    rng = seed.generator()
    counts = rng.poisson(rate * dt, int(n))
    jumps = jump_law.sample(rng, int(counts.sum()))
    owner = np.repeat(np.arange(int(n)), counts)
    out = np.bincount(owner, weights=jumps, minlength=int(n)).astype(float)
    if centered:
        out -= rate * dt * jump_law.mean()
    return out


# ── Dispatch ────────────────────────────────────────────────────────────────


def draw_levy(spec: NoiseSpec, dt: float, n: int, dim: int, seed: SeedPolicy) -> tuple[np.ndarray, float | None]:
    """Levy increments as an (n, dim) array plus the tempered acceptance ratio, if any."""
    _check_grid(dt, n)
    size = int(n) * int(dim)
    if spec.levy_kind == LevyKind.NONE or size == 0:
        return np.zeros((int(n), int(dim))), None

    ratio = None
    if spec.levy_kind == LevyKind.ALPHA_STABLE:
        flat = sample_alpha_stable(spec.alpha, spec.scale, dt, size, seed)  # type: ignore[arg-type]
    elif spec.levy_kind == LevyKind.TEMPERED_STABLE:
        draw = sample_tempered_stable(spec.alpha, spec.lam, spec.scale, dt, size, seed)  # type: ignore[arg-type]
        flat, ratio = draw.values, draw.acceptance_ratio
    else:
        flat = sample_compound_poisson(
            spec.jump_rate,  # type: ignore[arg-type]
            spec.jump_law,  # type: ignore[arg-type]
            dt,
            size,
            seed,
            centered=spec.centered,
            gamma_inf=spec.gamma_inf,
        )
    return flat.reshape(int(n), int(dim)), ratio


def sample_levy_increments(spec: NoiseSpec, dt: float, n: int, dim: int, seed: SeedPolicy) -> np.ndarray:
    """(n, dim) Levy increments; each state component gets its own copy of the 1-d driver."""
    values, _ = draw_levy(spec, dt, n, dim, seed)
    return values
