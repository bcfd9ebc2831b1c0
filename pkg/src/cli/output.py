"""
Writers for run artifacts: CSV tables, JSON records and plot-data text.

Everything except run.json is a pure function of the config and seed.
"""

import json
import math
from collections.abc import Sequence
from datetime import datetime
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

FLOAT_FORMAT = "%.17g"


def prepare_run_dir(out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json(path: Path, payload: dict[str, Any]) -> Path:
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    return path


def write_table(path: Path, records: Sequence[dict[str, Any]], columns: Sequence[str] | None = None) -> Path:
    frame = pd.DataFrame.from_records(list(records), columns=list(columns) if columns else None)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def write_plot_data(path: Path, records: Sequence[dict[str, Any]], columns: Sequence[str]) -> Path:
    """Whitespace-separated columns behind a '#' header line, readable by gnuplot or numpy.loadtxt."""
    frame = pd.DataFrame.from_records(list(records), columns=list(columns))
    with path.open("w") as fh:
        fh.write("# " + " ".join(columns) + "\n")
        frame.to_csv(fh, sep=" ", index=False, header=False, float_format=FLOAT_FORMAT, na_rep="nan")
    return path


def write_run_sidecar(
    out_dir: Path, run_id: int | None, source: str, started: datetime, finished: datetime, **extra: Any
) -> Path:
    payload = {
        "run_id": run_id,
        "config": source,
        "started_at": started.isoformat(),
        "finished_at": finished.isoformat(),
        "elapsed_seconds": (finished - started).total_seconds(),
        **extra,
    }
    return write_json(out_dir / "run.json", payload)
