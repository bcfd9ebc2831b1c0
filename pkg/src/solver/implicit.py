"""
Per-step nonlinear solve for the drift-implicit update  Y = c + dt * f(t, Y).

Rows of a batch are solved independently: each row carries its own damping
and convergence mask, so a row's result does not depend on which other rows
share the batch.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from src.errors import ConfigurationError, ImplicitStepError, SingularJacobianError
from src.model.problem import SdeProblem

log = logging.getLogger(__name__)

_EPS = np.finfo(float).eps
_MAX_BRACKET_DOUBLINGS = 60


@dataclass(frozen=True)
class ImplicitStepConfig:
    abs_tol: float = 1e-12
    max_newton_iters: int = 50
    max_bisection_iters: int = 200
    damping: float = 1.0
    max_halvings: int = 30

    def __post_init__(self) -> None:
        if not self.abs_tol > 0:
            raise ConfigurationError(f"abs_tol must be > 0, got {self.abs_tol}")
        for name in ("max_newton_iters", "max_bisection_iters", "max_halvings"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if not 0.0 < self.damping <= 1.0:
            raise ConfigurationError(f"damping must lie in (0, 1], got {self.damping}")


@dataclass(frozen=True)
class StepDiagnostics:
    newton_iters: int
    fell_back: bool
    final_residual: float


@dataclass
class SolverStats:
    steps: int = 0
    total_newton_iters: int = 0
    max_newton_iters: int = 0
    fallbacks: int = 0
    max_residual: float = 0.0

    def record(self, diag: StepDiagnostics, rows: int = 1) -> None:
        self.steps += rows
        self.total_newton_iters += diag.newton_iters * rows
        self.max_newton_iters = max(self.max_newton_iters, diag.newton_iters)
        self.fallbacks += int(diag.fell_back)
        self.max_residual = max(self.max_residual, diag.final_residual)

    def merge(self, other: "SolverStats") -> "SolverStats":
        return SolverStats(
            steps=self.steps + other.steps,
            total_newton_iters=self.total_newton_iters + other.total_newton_iters,
            max_newton_iters=max(self.max_newton_iters, other.max_newton_iters),
            fallbacks=self.fallbacks + other.fallbacks,
            max_residual=max(self.max_residual, other.max_residual),
        )

    def to_dict(self) -> dict[str, float]:
        mean = self.total_newton_iters / self.steps if self.steps else 0.0
        return {
            "steps": self.steps,
            "mean_newton_iters": mean,
            "max_newton_iters": self.max_newton_iters,
            "fallbacks": self.fallbacks,
            "max_residual": self.max_residual,
        }


DEFAULT_CONFIG = ImplicitStepConfig()


def _residual(problem: SdeProblem, t: float, y: np.ndarray, c: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    f = problem.drift(t, y)
    return y - c - dt * f, f


def _tolerance(cfg: ImplicitStepConfig, y: np.ndarray, c: np.ndarray, dt: float, f: np.ndarray) -> np.ndarray:
    """abs_tol, raised to the rounding floor of the residual for large states."""
    magnitude = np.abs(y).sum(axis=-1) + np.abs(c).sum(axis=-1) + dt * np.abs(f).sum(axis=-1)
    return np.maximum(cfg.abs_tol, 8.0 * _EPS * magnitude)


def _newton_matrix(problem: SdeProblem, t: float, y: np.ndarray, dt: float) -> np.ndarray:
    d = y.shape[-1]
    return np.eye(d) - dt * problem.jacobian(t, y)


def newton_residual(problem: SdeProblem, t: float, y: np.ndarray, c: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """r = Y - c - dt f(t, Y) and J = I - dt df/dx."""
    y = np.asarray(y, dtype=float)
    r, _ = _residual(problem, t, y, np.asarray(c, dtype=float), dt)
    jac = _newton_matrix(problem, t, y, dt)
    if np.any(~np.isfinite(jac)) or np.any(np.abs(np.linalg.det(jac)) <= _EPS):
        raise SingularJacobianError(f"Newton matrix is singular at t={t}")
    return r, jac


def _newton_step(jac: np.ndarray, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve J s = r row-wise; returns the steps and a mask of rows whose J was usable."""
    if r.shape[-1] == 1:
        denom = jac[:, 0, 0]
        usable = np.isfinite(denom) & (np.abs(denom) > _EPS)
        step = np.where(usable, r[:, 0] / np.where(usable, denom, 1.0), 0.0)[:, None]
        return step, usable
    usable = np.all(np.isfinite(jac), axis=(1, 2)) & (np.abs(np.linalg.det(jac)) > _EPS)
    step = np.zeros_like(r)
    if usable.any():
        step[usable] = np.linalg.solve(jac[usable], r[usable][..., None])[..., 0]
    return step, usable


def bisection_bracket(problem: SdeProblem, t: float, c: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Bracket [c - A, c + A] for d = 1 with A = 2 (|c| + dt |f(t,0)| + 1) / (1 - K3 dt).

    Without a declared K3 the half-width starts from K3 = 0 and doubles until
    the residual changes sign at both ends.
    """
    c = np.asarray(c, dtype=float).reshape(-1, 1)
    k3 = problem.constants.K3
    modulus = 1.0 - (k3 if k3 is not None else 0.0) * dt
    if not modulus > 0:
        raise ConfigurationError(f"implicit step needs K3*dt < 1, got K3={k3}, dt={dt}")
    f0 = problem.drift(t, np.zeros((1, 1)))[0, 0]
    half = 2.0 * (np.abs(c[:, 0]) + dt * abs(f0) + 1.0) / modulus
    for _ in range(_MAX_BRACKET_DOUBLINGS):
        lo = c[:, 0] - half
        hi = c[:, 0] + half
        r_lo, _ = _residual(problem, t, lo[:, None], c, dt)
        r_hi, _ = _residual(problem, t, hi[:, None], c, dt)
        open_rows = ~((r_lo[:, 0] <= 0) & (r_hi[:, 0] >= 0))
        if not open_rows.any():
            return lo, hi
        half = np.where(open_rows, 2.0 * half, half)
    raise ImplicitStepError(f"could not bracket the implicit root at t={t}")


def _bisect(problem: SdeProblem, t: float, c: np.ndarray, dt: float, cfg: ImplicitStepConfig) -> np.ndarray:
    lo, hi = bisection_bracket(problem, t, c, dt)
    mid = 0.5 * (lo + hi)
    for _ in range(cfg.max_bisection_iters):
        mid = 0.5 * (lo + hi)
        r, f = _residual(problem, t, mid[:, None], c, dt)
        done = np.abs(r[:, 0]) <= _tolerance(cfg, mid[:, None], c, dt, f)
        if done.all():
            break
        positive = r[:, 0] > 0
        hi = np.where(positive & ~done, mid, hi)
        lo = np.where(~positive & ~done, mid, lo)
        if np.all(done | (hi - lo <= 2.0 * _EPS * np.maximum(1.0, np.abs(mid)))):
            mid = 0.5 * (lo + hi)
            break
    return mid[:, None]


def _picard(problem: SdeProblem, t: float, y: np.ndarray, c: np.ndarray, dt: float, cfg: ImplicitStepConfig) -> np.ndarray:
    """Fixed-point iteration Y <- c + dt f(t, Y); contracts only where dt * Lip(f) < 1."""
    y = y.copy()
    for _ in range(cfg.max_bisection_iters):
        r, f = _residual(problem, t, y, c, dt)
        done = np.linalg.norm(r, axis=1) <= _tolerance(cfg, y, c, dt, f)
        if done.all():
            break
        y[~done] = c[~done] + dt * f[~done]
    return y


def solve_implicit_step(
    problem: SdeProblem, t_next: float, c: np.ndarray, dt: float, cfg: ImplicitStepConfig = DEFAULT_CONFIG
) -> tuple[np.ndarray, StepDiagnostics]:
    """Solve Y = c + dt f(t_next, Y) for c of shape (d,) or (B, d)."""
    c_in = np.asarray(c, dtype=float)
    if not (dt >= 0 and math.isfinite(dt)):
        raise ConfigurationError(f"dt must be a finite value >= 0, got {dt}")
    if dt == 0:
        return c_in.copy(), StepDiagnostics(0, False, 0.0)

    cs = c_in.reshape(-1, problem.dim)
    y = cs.copy()
    r, f = _residual(problem, t_next, y, cs, dt)
    rn = np.linalg.norm(r, axis=1)
    active = ~(rn <= _tolerance(cfg, y, cs, dt, f))
    stuck = np.zeros(len(cs), dtype=bool)
    iters = np.zeros(len(cs), dtype=int)

    for _ in range(cfg.max_newton_iters):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        ya, ca, ra, rna = y[idx], cs[idx], r[idx], rn[idx]
        step, usable = _newton_step(_newton_matrix(problem, t_next, ya, dt), ra)
        lam = np.full(len(idx), cfg.damping)
        trial = ya - lam[:, None] * step
        rt, ft = _residual(problem, t_next, trial, ca, dt)
        rnt = np.linalg.norm(rt, axis=1)
        worse = usable & ~(rnt < rna)
        for _ in range(cfg.max_halvings):
            if not worse.any():
                break
            w = np.flatnonzero(worse)
            lam[w] *= 0.5
            trial[w] = ya[w] - lam[w, None] * step[w]
            rt[w], ft[w] = _residual(problem, t_next, trial[w], ca[w], dt)
            rnt[w] = np.linalg.norm(rt[w], axis=1)
            worse[w] = ~(rnt[w] < rna[w])

        failed = worse | ~usable
        ok = ~failed
        stuck[idx[failed]] = True
        active[idx[failed]] = False
        good = idx[ok]
        y[good], r[good], rn[good] = trial[ok], rt[ok], rnt[ok]
        iters[good] += 1
        active[good] = ~(rnt[ok] <= _tolerance(cfg, trial[ok], ca[ok], dt, ft[ok]))

    pending = stuck | active
    fell_back = bool(pending.any())
    if fell_back:
        rows = np.flatnonzero(pending)
        method = "bisection" if problem.dim == 1 else "picard"
        log.debug("[solver] fallback %s rows=%d t=%.6g dt=%.3g", method, rows.size, t_next, dt)
        if problem.dim == 1:
            y[rows] = _bisect(problem, t_next, cs[rows], dt, cfg)
        else:
            y[rows] = _picard(problem, t_next, y[rows], cs[rows], dt, cfg)

    r, f = _residual(problem, t_next, y, cs, dt)
    rn = np.linalg.norm(r, axis=1)
    tol = _tolerance(cfg, y, cs, dt, f)
    diag = StepDiagnostics(int(iters.max(initial=0)), fell_back, float(rn.max(initial=0.0)))
    if np.any(~(rn <= tol)):
        raise ImplicitStepError(
            f"implicit step did not converge at t={t_next:.6g} (residual {diag.final_residual:.3e})",
            diagnostics=diag,
        )
    return y.reshape(c_in.shape), diag
