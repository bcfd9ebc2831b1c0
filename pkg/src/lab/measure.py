"""
Empirical-law diagnostics for long-time behaviour: KS statistics, k-Wasserstein
distances, invariant-measure convergence and two-initial-value coupling.
All distance computations work on 1-d samples.
"""

import enum
import json
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import partial, reduce
from pathlib import Path
from typing import Any

import numpy as np
from scipy import stats

from src.engine.accumulate import RunningMoments
from src.engine.ensemble import DEFAULT_BATCH_SIZE, batch_tapes, initial_batch, map_batches, stack_increments
from src.engine.simulate import integrate
from src.engine.tape import grid_count
from src.errors import ConfigurationError
from src.model.problem import SdeProblem
from src.noise.samplers import sample_alpha_stable
from src.noise.seeds import SeedPolicy, StreamTag
from src.noise.spec import LevyKind
from src.solver.implicit import DEFAULT_CONFIG, ImplicitStepConfig

log = logging.getLogger(__name__)

MIN_REFERENCE_SIZE = 1_000_000
REFERENCE_FACTOR = 10
BOOTSTRAP_ROUNDS = 20
KS_LEVEL = 0.01
_CHECKPOINT_SLACK = 1e-9


# ── Types ───────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class EmpiricalMeasure:
    values: np.ndarray
    time: float = 0.0
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        values = np.sort(np.asarray(self.values, dtype=float).ravel())
        if values.size < 1:
            raise ConfigurationError("an empirical measure needs at least one sample")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return int(self.values.size)


class ReferenceKind(str, enum.Enum):
    ANALYTIC_STABLE = "analytic_stable"
    EMPIRICAL_SNAPSHOT = "empirical_snapshot"


@dataclass(frozen=True)
class StationaryReference:
    kind: ReferenceKind
    alpha: float | None = None
    scale: float | None = None
    snapshot: EmpiricalMeasure | None = None

    def __post_init__(self) -> None:
        if self.kind == ReferenceKind.ANALYTIC_STABLE:
            if self.alpha is None or not 0.0 < self.alpha <= 2.0:
                raise ConfigurationError(f"reference alpha must lie in (0, 2], got {self.alpha}")
            if self.scale is None or not self.scale > 0:
                raise ConfigurationError(f"reference scale must be > 0, got {self.scale}")
        elif self.snapshot is None:
            raise ConfigurationError("an empirical reference needs a snapshot")

    @classmethod
    def analytic_stable(cls, alpha: float, theta: float = 2.0, noise_scale: float = 2.0) -> "StationaryReference":
        """Stationary law of dx = -theta x dt + noise_scale dL: scale noise_scale * (1/(alpha theta))^(1/alpha)."""
        if not theta > 0:
            raise ConfigurationError(f"mean-reversion rate must be > 0, got {theta}")
        return cls(ReferenceKind.ANALYTIC_STABLE, alpha=alpha, scale=noise_scale * (1.0 / (alpha * theta)) ** (1.0 / alpha))

    @classmethod
    def empirical(cls, snapshot: EmpiricalMeasure) -> "StationaryReference":
        return cls(ReferenceKind.EMPIRICAL_SNAPSHOT, snapshot=snapshot)

    def reference_sample(self, n: int, seed: SeedPolicy | None = None) -> np.ndarray:
        if self.kind == ReferenceKind.EMPIRICAL_SNAPSHOT:
            assert self.snapshot is not None
            return self.snapshot.values
        assert self.alpha is not None and self.scale is not None
        size = max(REFERENCE_FACTOR * int(n), MIN_REFERENCE_SIZE)
        base = seed if seed is not None else SeedPolicy(0)
        return np.sort(sample_alpha_stable(self.alpha, self.scale, 1.0, size, base.with_stream(StreamTag.REFERENCE)))

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind.value}
        if self.kind == ReferenceKind.ANALYTIC_STABLE:
            out.update(alpha=self.alpha, scale=self.scale)
        else:
            assert self.snapshot is not None
            out.update(time=self.snapshot.time, n=self.snapshot.n)
        return out


def _values(sample: EmpiricalMeasure | np.ndarray | Sequence[float]) -> np.ndarray:
    if isinstance(sample, EmpiricalMeasure):
        return sample.values
    return np.sort(np.asarray(sample, dtype=float).ravel())


# ── Distances ───────────────────────────────────────────────────────────────


def wasserstein_k(
    a: EmpiricalMeasure | np.ndarray | Sequence[float],
    b: EmpiricalMeasure | np.ndarray | Sequence[float],
    k: float = 1.0,
    seed: SeedPolicy | None = None,
) -> float:
    """W_k for the cost |u - v|^k, k in (0, 1], via the sorted coupling.

    With unequal sizes the larger sample is subsampled without replacement to
    the smaller size using a fixed seed.
    """
    if not 0.0 < k <= 1.0:
        raise ConfigurationError(f"k must lie in (0, 1], got {k}")
    x, y = _values(a), _values(b)
    if x.size == 0 or y.size == 0:
        raise ConfigurationError("wasserstein distance of an empty sample")
    if x.size != y.size:
        rng = (seed if seed is not None else SeedPolicy(0)).with_stream(StreamTag.BOOTSTRAP).generator()
        if x.size > y.size:
            x = np.sort(rng.choice(x, y.size, replace=False))
        else:
            y = np.sort(rng.choice(y, x.size, replace=False))
    return float(np.mean(np.abs(x - y) ** k))


@dataclass(frozen=True)
class KsResult:
    statistic: float
    pvalue: float


def ks_statistic(
    a: EmpiricalMeasure | np.ndarray,
    ref: StationaryReference,
    seed: SeedPolicy | None = None,
    reference_values: np.ndarray | None = None,
) -> KsResult:
    """Two-sample KS distance and asymptotic p-value against a realised reference sample."""
    x = _values(a)
    ref_values = reference_values if reference_values is not None else ref.reference_sample(x.size, seed)
    if ref_values.size < 1 or not np.all(np.isfinite(ref_values)):
        raise ConfigurationError("reference sample is empty or not finite")
    if np.ptp(ref_values) == 0:
        raise ConfigurationError("reference sample is degenerate (all values equal)")
    if ref.kind == ReferenceKind.ANALYTIC_STABLE and ref_values.size < REFERENCE_FACTOR * x.size:
        raise ConfigurationError(f"analytic reference sample must hold at least {REFERENCE_FACTOR}x the sample")
    res = stats.ks_2samp(x, ref_values, method="asymp")
    return KsResult(float(res.statistic), float(res.pvalue))


def bootstrap_stderr(
    measure: EmpiricalMeasure,
    reference_values: np.ndarray,
    k: float = 1.0,
    n_boot: int = BOOTSTRAP_ROUNDS,
    seed: SeedPolicy | None = None,
) -> tuple[float, float]:
    """Bootstrap (over paths) standard errors of the KS distance and of W_k."""
    if n_boot < 2:
        raise ConfigurationError(f"bootstrap needs at least 2 rounds, got {n_boot}")
    rng = (seed if seed is not None else SeedPolicy(0)).with_stream(StreamTag.BOOTSTRAP).generator()
    ds, ws = [], []
    for _ in range(n_boot):
        resample = np.sort(rng.choice(measure.values, measure.n, replace=True))
        ds.append(stats.ks_2samp(resample, reference_values, method="asymp").statistic)
        ws.append(wasserstein_k(resample, reference_values, k, seed))
    return float(np.std(ds, ddof=1)), float(np.std(ws, ddof=1))


# ── Empirical law evolution ─────────────────────────────────────────────────


def _require_symmetric(problem: SdeProblem) -> None:
    noise = problem.noise
    if noise.levy_kind == LevyKind.COMPOUND_POISSON and not noise.centered:
        assert noise.jump_law is not None
        if noise.jump_law.mean() != 0.0:
            raise ConfigurationError(f"{problem.name}: invariant-law experiments need a zero-mean jump driver")


def checkpoint_steps(checkpoints: Sequence[float], dt: float) -> list[int]:
    steps = []
    for t in checkpoints:
        ratio = t / dt
        i = round(ratio)
        if i < 0 or abs(ratio - i) > _CHECKPOINT_SLACK * max(1.0, ratio):
            raise ConfigurationError(f"checkpoint t={t} is not a grid point of dt={dt}")
        steps.append(int(i))
    return steps


def _snapshot_batch(
    problem: SdeProblem, dt: float, steps: list[int], cfg: ImplicitStepConfig, seed: SeedPolicy, start: int, stop: int
) -> np.ndarray:
    n_steps = max(max(steps), 1)
    tapes = batch_tapes(problem, dt, seed, start, stop, n_fine=n_steps)
    brownian, levy = stack_increments(tapes, dt)
    states, _ = integrate(problem, dt, brownian, levy, initial_batch(problem, seed, start, stop), cfg, keep=steps)
    return states[..., 0]


def evolve_empirical_law(
    problem: SdeProblem,
    dt: float,
    n_paths: int,
    checkpoints: Sequence[float],
    seed: SeedPolicy,
    cfg: ImplicitStepConfig = DEFAULT_CONFIG,
    workers: int = 1,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> list[EmpiricalMeasure]:
    """Snapshots of the first state component at each checkpoint, from one ensemble run."""
    if n_paths < 2:
        raise ConfigurationError(f"empirical laws need n_paths >= 2, got {n_paths}")
    _require_symmetric(problem)
    steps = checkpoint_steps(checkpoints, dt)
    func = partial(_snapshot_batch, problem, dt, steps, cfg, seed)
    values = np.concatenate(map_batches(func, n_paths, batch_size, workers))
    provenance = {"problem": problem.name, "dt": dt, "n_paths": n_paths, "seed": seed.master_seed}
    log.info("[measure] %s evolved %d paths to %d checkpoints", problem.name, n_paths, len(steps))
    return [EmpiricalMeasure(values[:, j], time=i * dt, provenance=provenance) for j, i in enumerate(steps)]


# ── Invariant-measure report ────────────────────────────────────────────────


@dataclass(frozen=True)
class InvariantRow:
    time: float
    ks: float
    ks_pvalue: float
    ks_stderr: float
    wasserstein: float
    wasserstein_stderr: float

    def to_dict(self) -> dict[str, float]:
        return {
            "t": self.time,
            "ks": self.ks,
            "ks_pvalue": self.ks_pvalue,
            "ks_stderr": self.ks_stderr,
            "wasserstein": self.wasserstein,
            "wasserstein_stderr": self.wasserstein_stderr,
        }


@dataclass(frozen=True)
class InvariantReport:
    rows: tuple[InvariantRow, ...]
    k: float
    reference: dict[str, Any]

    @staticmethod
    def _decreasing(values: list[float], errors: list[float]) -> bool:
        return all(b < a + 3.0 * math.hypot(ea, eb) for a, b, ea, eb in zip(values, values[1:], errors, errors[1:]))

    @property
    def ks_decreasing(self) -> bool:
        return self._decreasing([r.ks for r in self.rows], [r.ks_stderr for r in self.rows])

    @property
    def wasserstein_decreasing(self) -> bool:
        return self._decreasing([r.wasserstein for r in self.rows], [r.wasserstein_stderr for r in self.rows])

    @property
    def final_pvalue(self) -> float:
        return self.rows[-1].ks_pvalue if self.rows else math.nan

    @property
    def final_indistinguishable(self) -> bool:
        return bool(self.rows) and self.final_pvalue > KS_LEVEL

    def records(self) -> list[dict[str, float]]:
        return [r.to_dict() for r in self.rows]

    def to_dict(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "reference": self.reference,
            "ks_decreasing": self.ks_decreasing,
            "wasserstein_decreasing": self.wasserstein_decreasing,
            "final_pvalue": self.final_pvalue,
            "final_indistinguishable": self.final_indistinguishable,
            "rows": self.records(),
        }


def invariant_convergence_report(
    snapshots: Sequence[EmpiricalMeasure],
    ref: StationaryReference,
    k: float = 1.0,
    seed: SeedPolicy | None = None,
    n_boot: int = BOOTSTRAP_ROUNDS,
) -> InvariantReport:
    if not snapshots:
        raise ConfigurationError("invariant report needs at least one snapshot")
    base = seed if seed is not None else SeedPolicy(0)
    reference_values = ref.reference_sample(max(s.n for s in snapshots), base)
    rows = []
    for j, snap in enumerate(snapshots):
        ks = ks_statistic(snap, ref, reference_values=reference_values)
        w = wasserstein_k(snap, reference_values, k, base)
        ks_se, w_se = bootstrap_stderr(snap, reference_values, k, n_boot, base.for_path(j))
        rows.append(InvariantRow(snap.time, ks.statistic, ks.pvalue, ks_se, w, w_se))
        log.info("[measure] t=%.4g ks=%.4f p=%.3g w%g=%.4f", snap.time, ks.statistic, ks.pvalue, k, w)
    return InvariantReport(tuple(rows), k, ref.to_dict())


# ── Two-initial-value coupling ──────────────────────────────────────────────


@dataclass
class CouplingCurve:
    dt: float
    steps: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    envelope: np.ndarray | None

    @property
    def times(self) -> np.ndarray:
        return self.dt * self.steps

    @property
    def within_envelope(self) -> bool | None:
        if self.envelope is None:
            return None
        return bool(np.all(self.mean <= self.envelope + 3.0 * self.stderr))

    def rows(self) -> list[dict[str, float]]:
        env = self.envelope if self.envelope is not None else np.full(self.mean.shape, np.nan)
        return [
            {"step": int(i), "t": float(t), "mean_sq_gap": float(m), "stderr": float(s), "envelope": float(e)}
            for i, t, m, s, e in zip(self.steps, self.times, self.mean, self.stderr, env)
        ]


def _coupling_batch(
    problem: SdeProblem,
    dt: float,
    n_steps: int,
    x0_a: np.ndarray,
    x0_b: np.ndarray,
    cfg: ImplicitStepConfig,
    seed: SeedPolicy,
    start: int,
    stop: int,
) -> RunningMoments:
    tapes = batch_tapes(problem, dt, seed, start, stop, n_fine=n_steps)
    brownian, levy = stack_increments(tapes, dt)
    n = stop - start
    path_a, _ = integrate(problem, dt, brownian, levy, np.broadcast_to(x0_a, (n, problem.dim)), cfg)
    path_b, _ = integrate(problem, dt, brownian, levy, np.broadcast_to(x0_b, (n, problem.dim)), cfg)
    moments = RunningMoments((n_steps + 1,))
    moments.add_batch(np.sum((path_a - path_b) ** 2, axis=-1))
    return moments


def two_initial_value_coupling(
    problem: SdeProblem,
    dt: float,
    x0_a: Sequence[float] | float,
    x0_b: Sequence[float] | float,
    n_paths: int,
    horizon: float,
    seed: SeedPolicy,
    cfg: ImplicitStepConfig = DEFAULT_CONFIG,
    workers: int = 1,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> CouplingCurve:
    """E|X_i^a - X_i^b|^2 under shared noise, with the envelope Q3^i |a - b|^2 when K3 and K4 are declared."""
    a = np.asarray(x0_a, dtype=float).reshape(problem.dim)
    b = np.asarray(x0_b, dtype=float).reshape(problem.dim)
    n_steps = grid_count(horizon, dt)
    if n_steps < 1:
        raise ConfigurationError(f"horizon {horizon} is shorter than one step of {dt}")
    func = partial(_coupling_batch, problem, dt, n_steps, a, b, cfg, seed)
    moments = reduce(RunningMoments.merge, map_batches(func, n_paths, batch_size, workers))

    steps = np.arange(n_steps + 1)
    envelope = None
    c = problem.constants
    if c.K3 is not None and c.K4 is not None:
        envelope = c.contraction_factor(dt) ** steps * float(np.sum((a - b) ** 2))
    log.info("[coupling] %s dt=%.3g paths=%d steps=%d", problem.name, dt, n_paths, n_steps)
    return CouplingCurve(dt, steps, moments.mean, moments.stderr, envelope)


# ── Plot data and persistence ───────────────────────────────────────────────


def density_plot_data(measure: EmpiricalMeasure, n_points: int = 200) -> list[dict[str, float]]:
    """Gaussian KDE (Silverman bandwidth) on a grid spanning the 0.5%-99.5% quantiles."""
    if measure.n < 2 or np.ptp(measure.values) == 0:
        raise ConfigurationError("density estimate needs a non-degenerate sample")
    kde = stats.gaussian_kde(measure.values, bw_method="silverman")
    lo, hi = np.quantile(measure.values, [0.005, 0.995])
    grid = np.linspace(lo, hi, n_points)
    return [{"x": float(x), "density": float(y)} for x, y in zip(grid, kde(grid))]


def _snapshot_paths(stem: Path) -> tuple[Path, Path]:
    # stems may contain dots, e.g. t_0.1
    stem = Path(stem)
    return stem.parent / f"{stem.name}.npy", stem.parent / f"{stem.name}.json"


def save_snapshot(measure: EmpiricalMeasure, stem: Path) -> Path:
    values_path, sidecar_path = _snapshot_paths(stem)
    values_path.parent.mkdir(parents=True, exist_ok=True)
    np.save(values_path, measure.values)
    sidecar = {"time": measure.time, "n": measure.n, "provenance": measure.provenance}
    sidecar_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return values_path


def load_snapshot(stem: Path) -> EmpiricalMeasure:
    values_path, sidecar_path = _snapshot_paths(stem)
    values = np.load(values_path)
    sidecar = json.loads(sidecar_path.read_text())
    return EmpiricalMeasure(values, time=float(sidecar["time"]), provenance=sidecar.get("provenance", {}))
