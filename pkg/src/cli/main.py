"""
levystep command line.

    levystep run <config.json | built-in name> [--paths N] [--seed S] [--workers W] [--out DIR]
    levystep list
    levystep show <built-in name>
    levystep runs [RUN_ID] [--limit N]
"""

import argparse
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from dotenv import load_dotenv

from src.cli import db
from src.cli.catalog import CATALOG, builtin_config, list_builtin
from src.cli.config import ExperimentConfig, config_from_mapping, load_config
from src.cli.output import prepare_run_dir, write_run_sidecar
from src.cli.report import build_catalog_text, build_run_detail_text, build_runs_text
from src.cli.runner import run_experiment
from src.errors import ConfigParseError, ConfigurationError, LevyStepError, SimulationError

load_dotenv()

OUT_DIR = os.getenv("LEVYSTEP_OUT_DIR", "./runs")
WORKERS = int(os.getenv("LEVYSTEP_WORKERS", "0")) or os.cpu_count() or 1
BATCH_SIZE = int(os.getenv("LEVYSTEP_BATCH_SIZE", "250"))
LOG_LEVEL = os.getenv("LEVYSTEP_LOG_LEVEL", "INFO")

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_PRECONDITION = 3
EXIT_SIMULATION = 4

log = logging.getLogger("levystep")


def exit_code_for(exc: LevyStepError) -> int:
    if isinstance(exc, ConfigParseError):
        return EXIT_PARSE
    if isinstance(exc, ConfigurationError):
        return EXIT_PRECONDITION
    if isinstance(exc, SimulationError):
        return EXIT_SIMULATION
    return 1


def configure_logging(level: str = LOG_LEVEL) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levystep", description="Drift-implicit Euler-Maruyama experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file or a built-in name")
    run.add_argument("config", help="path to a JSON config, or a built-in experiment name")
    run.add_argument("--paths", type=int, default=None, help="override the number of paths")
    run.add_argument("--seed", type=int, default=None, help="override the master seed")
    run.add_argument("--workers", type=int, default=None, help="parallel workers (default: LEVYSTEP_WORKERS or CPUs)")
    run.add_argument("--out", default=None, help="output root (default: LEVYSTEP_OUT_DIR)")

    sub.add_parser("list", help="list built-in experiments")

    show = sub.add_parser("show", help="print a built-in experiment config as JSON")
    show.add_argument("name")

    runs = sub.add_parser("runs", help="list recorded runs, or show one by id")
    runs.add_argument("run_id", nargs="?", type=int, help="show this run in full")
    runs.add_argument("--limit", type=int, default=20)
    return parser


def resolve_config(ref: str) -> ExperimentConfig:
    """A readable file wins; otherwise the reference must name a built-in experiment."""
    path = Path(ref)
    if path.exists() or ref not in CATALOG:
        return load_config(path)
    return config_from_mapping(builtin_config(ref), f"builtin:{ref}")


def cmd_run(args: argparse.Namespace) -> int:
    started = datetime.now(timezone.utc)
    run_id: int | None = None
    try:
        config = resolve_config(args.config).with_overrides(n_paths=args.paths, seed=args.seed)
        out_root = Path(args.out or config.output_dir or OUT_DIR)
        out_dir = out_root / config.name
        workers = args.workers or config.workers or WORKERS
        batch_size = config.batch_size or BATCH_SIZE
        if workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {workers}")

        run_id = db.start_run(config.name, config.kind.value, config.seed, str(out_dir))
        outcome = run_experiment(config, out_dir, workers, batch_size)
    except LevyStepError as exc:
        code = exit_code_for(exc)
        log.error("[run] %s failed (exit %d): %s", args.config, code, exc)
        if run_id is not None:
            db.finish_run(run_id, "failed", code)
        return code
    except Exception:
        log.exception("[run] %s failed unexpectedly", args.config)
        if run_id is not None:
            db.finish_run(run_id, "failed", 1)
        return 1

    finished = datetime.now(timezone.utc)
    write_run_sidecar(
        prepare_run_dir(outcome.out_dir),
        run_id,
        config.source,
        started,
        finished,
        workers=workers,
        batch_size=batch_size,
        argv=sys.argv[1:],
    )
    db.finish_run(run_id, "ok", EXIT_OK, outcome.headline)
    print(outcome.text)
    log.info("[run] %s exit=0 out=%s", config.name, outcome.out_dir)
    return EXIT_OK


def cmd_list(args: argparse.Namespace) -> int:
    print(build_catalog_text(list_builtin()))
    return EXIT_OK


def cmd_show(args: argparse.Namespace) -> int:
    try:
        config = builtin_config(args.name)
    except ConfigurationError as exc:
        log.error("[show] %s", exc)
        return EXIT_PRECONDITION
    print(json.dumps(config, indent=2))
    return EXIT_OK


def cmd_runs(args: argparse.Namespace) -> int:
    if args.run_id is None:
        print(build_runs_text(db.list_runs(args.limit)))
        return EXIT_OK
    row = db.get_run(args.run_id)
    if row is None:
        log.error("[runs] no run with id %d", args.run_id)
        return EXIT_PRECONDITION
    print(build_run_detail_text(row))
    return EXIT_OK


COMMANDS = {"run": cmd_run, "list": cmd_list, "show": cmd_show, "runs": cmd_runs}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
