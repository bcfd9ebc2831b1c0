"""Tests for config parsing, the catalog and the command line."""

import json
import logging
from pathlib import Path

import pytest

from src.cli import db
from src.cli.catalog import CATALOG, builtin_config, catalog_entry, list_builtin
from src.cli.config import ExperimentKind, config_from_mapping, load_config, parse_step
from src.cli.main import EXIT_OK, EXIT_PARSE, EXIT_PRECONDITION, EXIT_SIMULATION, exit_code_for, main
from src.errors import ConfigParseError, ConfigurationError, ImplicitStepError, LevyStepError

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

TINY_CONVERGENCE = {
    "name": "tiny-conv",
    "kind": "convergence",
    "problem": {
        "name": "tiny-cubic",
        "drift": [{"coef": -1, "power": 3}, {"coef": -5, "power": 1}, {"coef": 5, "power": 0}],
        "diffusion": [{"coef": -1, "power": 1}, {"coef": 3, "power": 0}],
        "noise": {
            "levy_kind": "compound_poisson",
            "jump_rate": 2.0,
            "jump_law": {"kind": "normal", "loc": 0.0, "scale": 0.5},
            "brownian_dim": 1,
            "gamma_inf": 4.0,
        },
        "constants": {"K3": -5, "K4": 1},
        "x0": 1.0,
        "horizon": 0.5,
    },
    "seed": 5,
    "n_paths": 100,
    "batch_size": 50,
    "dt_list": ["2^-3", "2^-4", "2^-5"],
    "reference_dt": "2^-7",
}


def _write(tmp_path: Path, payload: dict, name: str = "config.json") -> Path:
    path = tmp_path / name
    path.write_text(json.dumps(payload, indent=2))
    return path


# ── config parsing ──


def test_parse_step_forms():
    assert parse_step("2^-9", "dt", "cfg") == 2.0**-9
    assert parse_step("2**-3", "dt", "cfg") == 0.125
    assert parse_step(0.25, "dt", "cfg") == 0.25
    for bad in ("abc", 0, -0.1, True):
        with pytest.raises(ConfigParseError):
            parse_step(bad, "dt", "cfg")


def test_json_syntax_error_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "kind": "convergence",\n  "seed": ,\n}\n')
    with pytest.raises(ConfigParseError) as info:
        load_config(path)
    assert info.value.line == 3
    assert str(path) in str(info.value)


def test_field_type_error_reports_line_and_field(tmp_path):
    payload = dict(TINY_CONVERGENCE, n_paths="many")
    path = _write(tmp_path, payload)
    text = path.read_text().splitlines()
    expected_line = next(i for i, line in enumerate(text, start=1) if '"n_paths"' in line)
    with pytest.raises(ConfigParseError) as info:
        load_config(path)
    assert info.value.field == "n_paths"
    assert info.value.line == expected_line


def test_missing_required_and_unknown_kind():
    with pytest.raises(ConfigParseError, match="dt_list"):
        config_from_mapping({k: v for k, v in TINY_CONVERGENCE.items() if k != "dt_list"})
    with pytest.raises(ConfigParseError, match="unknown experiment kind"):
        config_from_mapping(dict(TINY_CONVERGENCE, kind="bake"))
    with pytest.raises(ConfigParseError):
        config_from_mapping([1, 2, 3])


def test_bad_step_in_list_names_the_index():
    with pytest.raises(ConfigParseError) as info:
        config_from_mapping(dict(TINY_CONVERGENCE, dt_list=["2^-3", "tiny"]))
    assert info.value.field == "dt_list[1]"


def _inline(**changes) -> dict:
    return dict(TINY_CONVERGENCE, problem=dict(TINY_CONVERGENCE["problem"], **changes))


@pytest.mark.parametrize(
    "payload, field",
    [
        (_inline(x0="abc"), "problem.x0"),
        (_inline(drift=[1]), "problem.drift[0]"),
        (_inline(drift=[{"coef": 1, "power": 1.5}]), "problem.drift[0].power"),
        (_inline(noise="x"), "problem.noise"),
        (_inline(noise={"levy_kind": "compound_poisson", "jump_rate": "fast"}), "problem.noise.jump_rate"),
        (_inline(constants={"K3": "low"}), "problem.constants.K3"),
        (dict(TINY_CONVERGENCE, noise="x"), "noise"),
        (dict(TINY_CONVERGENCE, problem="paper-9"), "problem"),
    ],
)
def test_malformed_problem_blocks_are_parse_errors(payload, field):
    with pytest.raises(ConfigParseError) as info:
        config_from_mapping(payload)
    assert info.value.field == field


def test_invariant_blocks_are_type_checked():
    base = builtin_config("paper-5.4")
    with pytest.raises(ConfigParseError) as info:
        config_from_mapping(dict(base, coupling={"x0_a": "ten", "x0_b": -10.0}))
    assert info.value.field == "coupling.x0_a"
    with pytest.raises(ConfigParseError) as info:
        config_from_mapping(dict(base, moments={"n_steps": 10.5}))
    assert info.value.field == "moments.n_steps"


def test_inline_config_fields():
    config = config_from_mapping(TINY_CONVERGENCE)
    assert config.kind == ExperimentKind.CONVERGENCE
    assert config.dt_list == (0.125, 0.0625, 0.03125)
    assert config.reference_dt == 2.0**-7
    assert config.problem is not None and config.problem.name == "tiny-cubic"
    overridden = config.with_overrides(n_paths=200, seed=9)
    assert (overridden.n_paths, overridden.seed) == (200, 9)
    assert overridden.to_dict()["n_paths"] == 200


def test_noise_block_replaces_problem_noise():
    config = config_from_mapping(
        {"kind": "sampler_validation", "problem": "paper-5.3", "noise": {"levy_kind": "alpha_stable", "alpha": 1.2}}
    )
    assert config.driver.alpha == 1.2
    assert config.problem is not None and config.problem.noise.alpha == 1.2


def test_invalid_name_rejected():
    with pytest.raises(ConfigParseError, match="name"):
        config_from_mapping(dict(TINY_CONVERGENCE, name="../escape"))


# ── catalog ──


def test_catalog_contents():
    names = [e.name for e in list_builtin()]
    assert names == ["paper-5.1a", "paper-5.1b", "paper-5.1c", "paper-5.2", "paper-5.3", "paper-5.4"]
    assert catalog_entry("paper-5.1c").band == (0.40, 0.60)
    assert catalog_entry("paper-5.2").expected == pytest.approx(0.7692)
    assert catalog_entry("paper-5.4").within_band(7.0)
    assert not catalog_entry("paper-5.4").within_band(4.0)
    assert not catalog_entry("paper-5.1a").within_band(None)
    with pytest.raises(ConfigurationError):
        catalog_entry("paper-6")


def test_builtin_config_is_a_copy():
    config = builtin_config("paper-5.3")
    config["checkpoints"].append(99.0)
    assert 99.0 not in CATALOG["paper-5.3"].config["checkpoints"]


@pytest.mark.parametrize("name", list(CATALOG))
def test_config_files_mirror_catalog(name):
    on_disk = json.loads((CONFIG_DIR / f"{name}.json").read_text())
    assert on_disk == CATALOG[name].config
    config = load_config(CONFIG_DIR / f"{name}.json")
    assert config.name == name


def test_exit_codes():
    assert exit_code_for(ConfigParseError("x", "bad")) == EXIT_PARSE
    assert exit_code_for(ConfigurationError("bad")) == EXIT_PRECONDITION
    assert exit_code_for(ImplicitStepError("bad")) == EXIT_SIMULATION
    assert exit_code_for(LevyStepError("bad")) == 1


# ── commands ──


def test_list_command(capsys):
    assert main(["list"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "paper-5.4" in out
    assert ">= 5" in out


def test_show_command(capsys):
    assert main(["show", "paper-5.3"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out) == builtin_config("paper-5.3")
    assert main(["show", "paper-9"]) == EXIT_PRECONDITION


def test_missing_config_file_exits_2(registry_db, out_dir, caplog):
    with caplog.at_level(logging.ERROR):
        code = main(["run", "no/such/config.json"])
    assert code == EXIT_PARSE
    assert "no/such/config.json" in caplog.text
    assert db.list_runs() == []


def test_inline_convergence_run(registry_db, tmp_path, capsys):
    path = _write(tmp_path, TINY_CONVERGENCE)
    out_root = tmp_path / "runs"
    assert main(["run", str(path), "--workers", "1", "--out", str(out_root)]) == EXIT_OK

    run_dir = out_root / "tiny-conv"
    for artifact in ("errors.csv", "fit.json", "order.dat", "summary.json", "run.json"):
        assert (run_dir / artifact).exists(), artifact
    summary = json.loads((run_dir / "summary.json").read_text())
    assert summary["kind"] == "convergence"
    assert len(summary["rows"]) == 3
    assert summary["accepted"] is None
    assert (run_dir / "order.dat").read_text().startswith("# dt rmse fitted guide_half")
    assert "order" in capsys.readouterr().out

    (row,) = db.list_runs()
    assert row["status"] == "ok"
    assert row["exit_code"] == 0
    assert row["headline"] == pytest.approx(summary["headline"])
    sidecar = json.loads((run_dir / "run.json").read_text())
    assert sidecar["run_id"] == row["run_id"]


def test_runs_are_byte_identical(registry_db, tmp_path):
    path = _write(tmp_path, TINY_CONVERGENCE)
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(path), "--workers", "1", "--out", str(first)]) == EXIT_OK
    assert main(["run", str(path), "--workers", "1", "--out", str(second)]) == EXIT_OK
    for artifact in ("errors.csv", "fit.json", "order.dat", "summary.json"):
        assert (first / "tiny-conv" / artifact).read_bytes() == (second / "tiny-conv" / artifact).read_bytes()


@pytest.mark.parametrize("changes", [{"x0": "abc"}, {"drift": [1]}, {"noise": "x"}, {"drift": [{"coef": 1, "power": 1.5}]}])
def test_malformed_inline_problem_exits_2(registry_db, tmp_path, caplog, changes):
    path = _write(tmp_path, _inline(**changes))
    with caplog.at_level(logging.ERROR):
        assert main(["run", str(path), "--out", str(tmp_path / "runs")]) == EXIT_PARSE
    assert "problem." in caplog.text
    assert db.list_runs() == []


def test_out_of_range_inline_value_exits_3(registry_db, tmp_path):
    noise = dict(TINY_CONVERGENCE["problem"]["noise"], jump_rate=-1.0)
    path = _write(tmp_path, _inline(noise=noise))
    assert main(["run", str(path), "--out", str(tmp_path / "runs")]) == EXIT_PRECONDITION


def test_too_few_paths_exits_3(registry_db, tmp_path):
    path = _write(tmp_path, dict(TINY_CONVERGENCE, n_paths=50))
    assert main(["run", str(path), "--out", str(tmp_path / "runs")]) == EXIT_PRECONDITION
    (row,) = db.list_runs()
    assert row["status"] == "failed"
    assert row["exit_code"] == EXIT_PRECONDITION


def test_builtin_name_resolves_and_paths_override(registry_db, out_dir):
    # 50 paths trips the convergence precondition before any simulation
    assert main(["run", "paper-5.1a", "--paths", "50"]) == EXIT_PRECONDITION
    (row,) = db.list_runs()
    assert row["name"] == "paper-5.1a"
    assert row["out_dir"] == str(out_dir / "paper-5.1a")


def test_simulation_failure_exits_4(registry_db, tmp_path, mocker):
    mocker.patch("src.cli.main.run_experiment", side_effect=ImplicitStepError("no root"))
    path = _write(tmp_path, TINY_CONVERGENCE)
    assert main(["run", str(path), "--out", str(tmp_path / "runs")]) == EXIT_SIMULATION
    (row,) = db.list_runs()
    assert row["exit_code"] == EXIT_SIMULATION


def test_probe_config_run(registry_db, tmp_path):
    out_root = tmp_path / "runs"
    assert main(["run", str(CONFIG_DIR / "probe-ou.json"), "--out", str(out_root)]) == EXIT_OK
    summary = json.loads((out_root / "probe-ou" / "summary.json").read_text())
    assert summary["accepted"] is True
    assert summary["headline"] == 0.0
    assert (out_root / "probe-ou" / "probes.csv").exists()


def test_selfcheck_config_run(registry_db, tmp_path):
    out_root = tmp_path / "runs"
    assert main(["run", str(CONFIG_DIR / "selfcheck-tempered.json"), "--out", str(out_root)]) == EXIT_OK
    summary = json.loads((out_root / "selfcheck-tempered" / "summary.json").read_text())
    assert summary["problem"] is None
    assert summary["moments"]["levy_kind"] == "tempered_stable"
    assert (out_root / "selfcheck-tempered" / "selfcheck.csv").exists()


def test_runs_command(registry_db, tmp_path, capsys):
    assert main(["runs"]) == EXIT_OK
    assert "no runs recorded" in capsys.readouterr().out
    path = _write(tmp_path, dict(TINY_CONVERGENCE, n_paths=50))
    main(["run", str(path), "--out", str(tmp_path / "runs")])
    capsys.readouterr()
    assert main(["runs", "--limit", "5"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "tiny-conv" in out
    assert "failed" in out
    (row,) = db.list_runs()
    assert main(["runs", str(row["run_id"])]) == EXIT_OK
    assert "exit      3" in capsys.readouterr().out
    assert main(["runs", "999"]) == EXIT_PRECONDITION
