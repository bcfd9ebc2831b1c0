"""
Console summaries for finished runs, the catalog and the run registry.
"""

import math
import sqlite3
from collections.abc import Sequence
from datetime import datetime, timezone

from src.cli.catalog import CatalogEntry
from src.engine.ensemble import MomentCurve
from src.lab.convergence import ErrorTable, OrderFit
from src.lab.measure import CouplingCurve, InvariantReport
from src.model.probes import ProbeReport
from src.noise.moments import MomentReport
from src.noise.selfcheck import SelfCheckReport


def _flag(ok: bool | None) -> str:
    if ok is None:
        return "n/a"
    return "yes" if ok else "NO"


def _band(entry: CatalogEntry) -> str:
    lo, hi = entry.band
    return f"[{lo:g}, {hi:g}]" if hi is not None else f">= {lo:g}"


def build_catalog_text(entries: Sequence[CatalogEntry]) -> str:
    lines = [f"{'name':<12} {'kind':<18} {'expected':>9}  {'band':<14} headline"]
    for e in entries:
        expected = f"{e.expected:g}" if e.expected is not None else "-"
        lines.append(f"{e.name:<12} {e.kind:<18} {expected:>9}  {_band(e):<14} {e.headline}")
    return "\n".join(lines)


def build_convergence_text(
    name: str, table: ErrorTable, fit: OrderFit, predicted: float | None, entry: CatalogEntry | None = None
) -> str:
    """Error table, fitted order and, for catalog runs, the acceptance verdict."""
    lines = [f"{name}: strong error against reference dt={table.reference_dt:.6g} ({table.error_mode})"]
    lines.append(f"  {'dt':>12} {'rmse':>12} {'stderr':>10} {'paths':>6}")
    for row in table.rows:
        lines.append(f"  {row.dt:>12.6g} {row.rmse:>12.5e} {row.rmse_stderr:>10.2e} {row.n_paths:>6d}")
    lo, hi = fit.slope_ci
    lines.append(f"  order {fit.slope:.4f}  95% CI [{lo:.4f}, {hi:.4f}]  r^2 {fit.r_squared:.4f}  rows {fit.n_rows}")
    if predicted is not None:
        lines.append(f"  predicted order {predicted:.4f}")
    if entry is not None:
        lines.append(f"  band {_band(entry)}: {_flag(entry.within_band(fit.slope))}")
    return "\n".join(lines)


def build_invariant_text(
    name: str,
    report: InvariantReport,
    moments: MomentCurve | None = None,
    coupling: CouplingCurve | None = None,
    headline: float | None = None,
    entry: CatalogEntry | None = None,
) -> str:
    lines = [f"{name}: distance to the reference ({report.reference['kind']}), k={report.k:g}"]
    lines.append(f"  {'t':>8} {'KS':>8} {'p':>10} {'W_k':>10} {'W_k se':>9}")
    for r in report.rows:
        lines.append(f"  {r.time:>8.4g} {r.ks:>8.4f} {r.ks_pvalue:>10.3g} {r.wasserstein:>10.4g} {r.wasserstein_stderr:>9.2g}")
    lines.append(
        f"  KS decreasing: {_flag(report.ks_decreasing)}  W_k decreasing: {_flag(report.wasserstein_decreasing)}"
        f"  final p > 0.01: {_flag(report.final_indistinguishable)}"
    )
    if moments is not None:
        peak = float(moments.mean.max())
        lines.append(f"  second moment: peak {peak:.4g}, within envelope: {_flag(moments.within_envelope)}")
    if coupling is not None:
        lines.append(
            f"  coupling: final gap {float(coupling.mean[-1]):.3e}, within envelope: {_flag(coupling.within_envelope)}"
        )
    if headline is not None and entry is not None:
        lines.append(f"  {entry.headline}: {headline:.4g}  band {_band(entry)}: {_flag(entry.within_band(headline))}")
    return "\n".join(lines)


def build_probe_text(name: str, reports: Sequence[ProbeReport]) -> str:
    lines = [f"{name}: assumption probes"]
    for rep in reports:
        claimed = ", ".join(f"{k}={v:g}" for k, v in rep.claimed.items())
        status = "ok" if rep.passed else f"{rep.violations} violations"
        lines.append(f"  {rep.name:<22} max ratio {rep.max_ratio:>10.4g}  {status:<16} ({claimed})")
    return "\n".join(lines)


def build_selfcheck_text(name: str, report: SelfCheckReport, moments: MomentReport) -> str:
    lines = [f"{name}: sampler self-check ({report.levy_kind.value}, n={report.n})"]
    for c in report.checks:
        lines.append(f"  {c.name:<28} {'ok' if c.passed else 'FAIL':<5} stat {c.statistic:.4g} tol {c.tolerance:.4g}")
    for cond in moments.conditions:
        lines.append(f"  moment {cond.name:<21} {cond.status.value:<10} {cond.reason}")
    lines.append(f"  admissible for convergence: {_flag(moments.admissible_for_convergence)}")
    return "\n".join(lines)


def _stamp(epoch: int | None) -> str:
    if epoch is None:
        return "-"
    return datetime.fromtimestamp(epoch, tz=timezone.utc).strftime("%Y-%m-%d %H:%M")


def build_runs_text(rows: Sequence[sqlite3.Row]) -> str:
    if not rows:
        return "no runs recorded"
    lines = [f"{'id':>4} {'name':<14} {'kind':<18} {'status':<8} {'exit':>4} {'headline':>10}  started"]
    for row in rows:
        headline = row["headline"]
        shown = f"{headline:.4g}" if headline is not None and math.isfinite(headline) else "-"
        code = "-" if row["exit_code"] is None else str(row["exit_code"])
        lines.append(
            f"{row['run_id']:>4} {row['name']:<14} {row['kind']:<18} {row['status']:<8} {code:>4} {shown:>10}"
            f"  {_stamp(row['started_at'])}"
        )
    return "\n".join(lines)


def build_run_detail_text(row: sqlite3.Row) -> str:
    headline = row["headline"]
    fields = [
        ("run", row["run_id"]),
        ("name", row["name"]),
        ("kind", row["kind"]),
        ("seed", row["seed"]),
        ("status", row["status"]),
        ("exit", "-" if row["exit_code"] is None else row["exit_code"]),
        ("headline", f"{headline:.6g}" if headline is not None else "-"),
        ("started", _stamp(row["started_at"])),
        ("finished", _stamp(row["finished_at"])),
        ("out", row["out_dir"]),
    ]
    return "\n".join(f"{key:<9} {value}" for key, value in fields)
