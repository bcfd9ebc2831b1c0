"""Basic tests for the console summary builders."""

from src.cli.catalog import catalog_entry, list_builtin
from src.cli.db import finish_run, list_runs, start_run
from src.cli.report import (
    build_catalog_text,
    build_convergence_text,
    build_invariant_text,
    build_probe_text,
    build_run_detail_text,
    build_runs_text,
)
from src.lab.convergence import ErrorRow, ErrorTable, fit_order
from src.lab.measure import InvariantReport, InvariantRow
from src.model.probes import ProbeReport


def _table() -> ErrorTable:
    rows = tuple(ErrorRow(dt=2.0**-j, mse=2.0 ** (-j), stderr=1e-4, n_paths=1000) for j in range(9, 13))
    return ErrorTable(rows, reference_dt=2.0**-15, problem="paper-5.1c")


def test_catalog_text_lists_every_entry():
    text = build_catalog_text(list_builtin())
    lines = text.splitlines()
    assert len(lines) == 7
    assert "[0.12, 0.3]" in text
    assert ">= 5" in text


def test_convergence_text_with_band_verdict():
    table = _table()
    fit = fit_order(table)
    text = build_convergence_text("paper-5.1c", table, fit, 0.5, catalog_entry("paper-5.1c"))
    assert "order 0.5000" in text
    assert "predicted order 0.5000" in text
    assert "band [0.4, 0.6]: yes" in text


def test_convergence_text_without_catalog_entry():
    table = _table()
    text = build_convergence_text("inline", table, fit_order(table), None)
    assert "predicted" not in text
    assert "band" not in text


def test_invariant_text_flags():
    rows = (
        InvariantRow(0.1, 0.9, 0.0, 0.01, 5.0, 0.1),
        InvariantRow(5.0, 0.01, 0.4, 0.01, 0.05, 0.01),
    )
    report = InvariantReport(rows, 1.0, {"kind": "analytic_stable", "alpha": 1.5, "scale": 0.96})
    text = build_invariant_text("paper-5.3", report, headline=0.4, entry=catalog_entry("paper-5.3"))
    assert "analytic_stable" in text
    assert "KS decreasing: yes" in text
    assert "final p > 0.01: yes" in text
    assert "band [0.01, 1]: yes" in text


def test_probe_text_reports_violations():
    ok = ProbeReport("one_sided_lipschitz", {"K3": -2.0}, 100, 5.0, -2.0, 0)
    bad = ProbeReport("khasminskii", {"q": 2.0, "M": 0.5}, 100, 5.0, 0.96, 12)
    text = build_probe_text("probe-ou", [ok, bad])
    assert "K3=-2" in text
    assert "12 violations" in text


def test_runs_text(registry_db):
    assert build_runs_text([]) == "no runs recorded"
    run_id = start_run("paper-5.4", "invariant_measure", 2024, "/tmp/runs/paper-5.4")
    finish_run(run_id, "ok", 0, 7.25)
    start_run("paper-5.3", "invariant_measure", 2024, "/tmp/runs/paper-5.3")
    text = build_runs_text(list_runs())
    assert "7.25" in text
    assert "running" in text


def test_run_detail_text(registry_db):
    run_id = start_run("paper-5.1c", "convergence", 7, "/tmp/runs/paper-5.1c")
    (row,) = list_runs()
    text = build_run_detail_text(row)
    assert f"run       {run_id}" in text
    assert "/tmp/runs/paper-5.1c" in text
    assert "finished  -" in text
    assert "headline  -" in text
