"""
Experiment execution: precondition checks, the per-kind pipelines and the
artifacts each one leaves in its run directory.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from src.cli.catalog import CATALOG, CatalogEntry
from src.cli.config import ExperimentConfig, ExperimentKind
from src.cli.output import prepare_run_dir, write_json, write_plot_data, write_table
from src.cli.report import build_convergence_text, build_invariant_text, build_probe_text, build_selfcheck_text
from src.engine.ensemble import second_moment_curve
from src.engine.tape import coarsening_factor, grid_count
from src.errors import ConfigurationError
from src.lab.convergence import MIN_PATHS, fit_order, order_plot_data, predicted_order, strong_error_table
from src.lab.measure import (
    EmpiricalMeasure,
    InvariantReport,
    StationaryReference,
    checkpoint_steps,
    density_plot_data,
    evolve_empirical_law,
    invariant_convergence_report,
    save_snapshot,
    two_initial_value_coupling,
)
from src.model.probes import run_declared_probes
from src.model.problem import SdeProblem
from src.noise.moments import validate_moment_conditions
from src.noise.seeds import SeedPolicy
from src.noise.selfcheck import sampler_self_check
from src.solver.implicit import DEFAULT_CONFIG

log = logging.getLogger(__name__)

_TIME_SLACK = 1e-9


@dataclass
class RunOutcome:
    name: str
    kind: ExperimentKind
    out_dir: Path
    summary: dict[str, Any]
    headline: float | None
    accepted: bool | None
    text: str


# ── Preconditions ───────────────────────────────────────────────────────────


def _need_problem(config: ExperimentConfig) -> SdeProblem:
    if config.problem is None:
        raise ConfigurationError(f"{config.name}: a problem is required for {config.kind.value}")
    return config.problem


def preflight(config: ExperimentConfig) -> None:
    """Check every precondition of the target pipeline before any simulation starts."""
    if config.seed < 0:
        raise ConfigurationError(f"seed must be >= 0, got {config.seed}")
    if config.batch_size is not None and config.batch_size < 1:
        raise ConfigurationError(f"batch_size must be >= 1, got {config.batch_size}")

    if config.kind == ExperimentKind.CONVERGENCE:
        problem = _need_problem(config)
        if config.n_paths < MIN_PATHS:
            raise ConfigurationError(f"convergence runs need n_paths >= {MIN_PATHS}, got {config.n_paths}")
        if problem.noise.heavy_tailed:
            raise ConfigurationError(f"{problem.name}: alpha-stable noise lacks the moments a convergence run needs")
        assert config.reference_dt is not None
        for dt in config.dt_list:
            coarsening_factor(config.reference_dt, dt)
        if grid_count(problem.horizon, max(config.dt_list)) < 1:
            raise ConfigurationError(f"step {max(config.dt_list)} exceeds the horizon {problem.horizon}")

    elif config.kind == ExperimentKind.INVARIANT_MEASURE:
        problem = _need_problem(config)
        assert config.dt is not None and config.reference is not None
        if config.n_paths < 2:
            raise ConfigurationError(f"invariant-law runs need n_paths >= 2, got {config.n_paths}")
        if not 0.0 < config.k <= 1.0:
            raise ConfigurationError(f"k must lie in (0, 1], got {config.k}")
        checkpoint_steps(config.checkpoints, config.dt)
        if list(config.checkpoints) != sorted(set(config.checkpoints)):
            raise ConfigurationError("checkpoints must be strictly increasing")
        if config.reference.get("kind") == "empirical_snapshot":
            t_ref = float(config.reference.get("time", config.checkpoints[-1]))
            if not any(abs(t - t_ref) <= _TIME_SLACK * max(1.0, t_ref) for t in config.checkpoints):
                raise ConfigurationError(f"reference snapshot time {t_ref} is not one of the checkpoints")
        else:
            _analytic_reference(config.reference)
        if config.moments is not None or config.coupling is not None:
            if not 0.0 < config.dt < 1.0:
                raise ConfigurationError(f"moment envelopes need dt in (0, 1), got {config.dt}")
        if config.coupling is not None:
            for key in ("x0_a", "x0_b"):
                if key not in config.coupling:
                    raise ConfigurationError(f"coupling needs {key}")
            horizon = float(config.coupling.get("horizon", problem.horizon))
            if grid_count(horizon, config.dt) < 1:
                raise ConfigurationError(f"coupling horizon {horizon} is shorter than one step")

    elif config.kind == ExperimentKind.PROBE_ASSUMPTIONS:
        problem = _need_problem(config)
        if not problem.probes:
            raise ConfigurationError(f"{problem.name}: no probes are declared")
        if config.n_pairs < 1 or not config.radius > 0:
            raise ConfigurationError("probes need n_pairs >= 1 and radius > 0")

    elif config.n_samples < 2:
        raise ConfigurationError(f"sampler validation needs n_samples >= 2, got {config.n_samples}")


def _analytic_reference(block: dict[str, Any]) -> StationaryReference:
    try:
        return StationaryReference.analytic_stable(
            float(block["alpha"]), float(block.get("theta", 2.0)), float(block.get("noise_scale", 2.0))
        )
    except KeyError as exc:
        raise ConfigurationError(f"analytic reference needs {exc.args[0]!r}") from exc


# ── Pipelines ───────────────────────────────────────────────────────────────


def _run_convergence(config: ExperimentConfig, out: Path, workers: int, batch_size: int) -> RunOutcome:
    problem = _need_problem(config)
    entry = CATALOG.get(config.name)
    assert config.reference_dt is not None
    table = strong_error_table(
        problem,
        config.dt_list,
        config.reference_dt,
        config.n_paths,
        SeedPolicy(config.seed),
        DEFAULT_CONFIG,
        workers=workers,
        batch_size=batch_size,
        error_mode=config.error_mode,
    )
    fit = fit_order(table)
    try:
        predicted: float | None = predicted_order(problem.constants, problem.noise, problem.has_diffusion)
    except ConfigurationError:
        predicted = None

    write_table(out / "errors.csv", table.records())
    write_json(out / "fit.json", {"fit": fit.to_dict(), "predicted_order": predicted})
    columns = ["dt", "rmse", "fitted", "guide_half"] + (["guide_predicted"] if predicted is not None else [])
    write_plot_data(out / "order.dat", order_plot_data(table, fit, predicted), columns)

    accepted = entry.within_band(fit.slope) if entry is not None else None
    summary = {
        "headline": fit.slope,
        "accepted": accepted,
        "fit": fit.to_dict(),
        "predicted_order": predicted,
        "reference_dt": table.reference_dt,
        "error_mode": table.error_mode,
        "rows": table.records(),
        "solver": table.solver,
    }
    text = build_convergence_text(config.name, table, fit, predicted, entry)
    return RunOutcome(config.name, config.kind, out, summary, fit.slope, accepted, text)


def _invariant_headline(
    config: ExperimentConfig, report: InvariantReport, entry: CatalogEntry | None
) -> tuple[float | None, bool | None]:
    """Final p-value for analytic references; W_k(t=0.2) / W_k(t=1) for snapshot references."""
    assert config.reference is not None
    if config.reference.get("kind") == "analytic_stable":
        headline = report.final_pvalue
        accepted = (entry.within_band(headline) and report.ks_decreasing) if entry is not None else None
        return headline, accepted

    by_time = {round(r.time, 9): r.wasserstein for r in report.rows}
    early, late = by_time.get(0.2), by_time.get(1.0)
    if early is None or late is None:
        return None, None
    headline = early / late if late > 0 else math.inf
    return headline, entry.within_band(headline) if entry is not None else None


def _run_invariant(config: ExperimentConfig, out: Path, workers: int, batch_size: int) -> RunOutcome:
    problem = _need_problem(config)
    entry = CATALOG.get(config.name)
    seed = SeedPolicy(config.seed)
    assert config.dt is not None and config.reference is not None

    snapshots = evolve_empirical_law(
        problem, config.dt, config.n_paths, config.checkpoints, seed, DEFAULT_CONFIG, workers, batch_size
    )
    for snap in snapshots:
        save_snapshot(snap, out / "snapshots" / f"t_{snap.time:g}")
        if snap.n >= 2 and snap.values[-1] > snap.values[0]:
            write_plot_data(out / f"density_t_{snap.time:g}.dat", density_plot_data(snap), ["x", "density"])

    if config.reference.get("kind") == "analytic_stable":
        reference = _analytic_reference(config.reference)
    else:
        t_ref = float(config.reference.get("time", config.checkpoints[-1]))
        base: EmpiricalMeasure = min(snapshots, key=lambda s: abs(s.time - t_ref))
        reference = StationaryReference.empirical(base)
    report = invariant_convergence_report(snapshots, reference, config.k, seed)
    write_table(out / "distances.csv", report.records())

    summary: dict[str, Any] = {"report": report.to_dict()}
    moments = coupling = None
    extra_ok: list[bool | None] = []
    if config.moments is not None:
        n_steps = config.moments.get("n_steps")
        moments = second_moment_curve(
            problem, config.dt, config.n_paths, seed, DEFAULT_CONFIG, n_steps, workers, batch_size
        )
        write_table(out / "moments.csv", moments.rows())
        summary["moments"] = {"within_envelope": moments.within_envelope, "peak": float(moments.mean.max())}
        extra_ok.append(moments.within_envelope)
    if config.coupling is not None:
        horizon = float(config.coupling.get("horizon", problem.horizon))
        coupling = two_initial_value_coupling(
            problem,
            config.dt,
            config.coupling["x0_a"],
            config.coupling["x0_b"],
            config.n_paths,
            horizon,
            seed,
            DEFAULT_CONFIG,
            workers,
            batch_size,
        )
        write_table(out / "coupling.csv", coupling.rows())
        summary["coupling"] = {"within_envelope": coupling.within_envelope, "final_gap": float(coupling.mean[-1])}
        extra_ok.append(coupling.within_envelope)

    headline, accepted = _invariant_headline(config, report, entry)
    if accepted is not None and extra_ok:
        accepted = accepted and all(ok is not False for ok in extra_ok)
    summary.update(headline=headline, accepted=accepted)
    text = build_invariant_text(config.name, report, moments, coupling, headline, entry)
    return RunOutcome(config.name, config.kind, out, summary, headline, accepted, text)


def _run_probes(config: ExperimentConfig, out: Path) -> RunOutcome:
    problem = _need_problem(config)
    reports = run_declared_probes(problem, config.n_pairs, config.radius, SeedPolicy(config.seed))
    records = [r.to_dict() for r in reports]
    write_table(
        out / "probes.csv",
        [{k: r[k] for k in ("name", "passed", "max_ratio", "violations", "n_samples", "radius")} for r in records],
    )
    passed = all(r.passed for r in reports)
    summary = {"headline": float(sum(r.violations for r in reports)), "accepted": passed, "probes": records}
    return RunOutcome(
        config.name, config.kind, out, summary, summary["headline"], passed, build_probe_text(config.name, reports)
    )


def _run_selfcheck(config: ExperimentConfig, out: Path) -> RunOutcome:
    spec = config.driver
    report = sampler_self_check(spec, config.n_samples, SeedPolicy(config.seed))
    moments = validate_moment_conditions(spec)
    write_table(out / "selfcheck.csv", [c.to_dict() for c in report.checks])
    summary = {
        "headline": float(sum(not c.passed for c in report.checks)),
        "accepted": report.passed,
        "selfcheck": report.to_dict(),
        "moments": moments.to_dict(),
    }
    text = build_selfcheck_text(config.name, report, moments)
    return RunOutcome(config.name, config.kind, out, summary, summary["headline"], report.passed, text)


def run_experiment(config: ExperimentConfig, out_dir: Path, workers: int, batch_size: int) -> RunOutcome:
    preflight(config)
    out = prepare_run_dir(out_dir)
    log.info("[run] %s kind=%s paths=%d seed=%d out=%s", config.name, config.kind.value, config.n_paths, config.seed, out)

    if config.kind == ExperimentKind.CONVERGENCE:
        outcome = _run_convergence(config, out, workers, batch_size)
    elif config.kind == ExperimentKind.INVARIANT_MEASURE:
        outcome = _run_invariant(config, out, workers, batch_size)
    elif config.kind == ExperimentKind.PROBE_ASSUMPTIONS:
        outcome = _run_probes(config, out)
    else:
        outcome = _run_selfcheck(config, out)

    summary = {
        "name": config.name,
        "kind": config.kind.value,
        "config": config.to_dict(),
        "problem": config.problem.summary() if config.problem is not None else None,
        **outcome.summary,
    }
    write_json(out / "summary.json", summary)
    outcome.summary = summary
    if outcome.accepted is False:
        log.warning("[run] %s headline %s is outside its acceptance band", config.name, outcome.headline)
    return outcome
