"""
Synchronous SQLite run registry.
Every `run` invocation that gets past config parsing leaves one row here;
the file is opened in WAL mode so a listing can run next to a live experiment.
"""

import os
import sqlite3
import time

DB_PATH: str = os.getenv("LEVYSTEP_DB_PATH", "./levystep.db")

_CREATE_RUNS = """
CREATE TABLE IF NOT EXISTS runs (
    run_id      INTEGER PRIMARY KEY AUTOINCREMENT,
    name        TEXT    NOT NULL,
    kind        TEXT    NOT NULL,
    seed        INTEGER NOT NULL,
    out_dir     TEXT    NOT NULL,
    status      TEXT    NOT NULL DEFAULT 'running',
    exit_code   INTEGER,
    headline    REAL,
    started_at  INTEGER NOT NULL,
    finished_at INTEGER
)
"""


def get_db() -> sqlite3.Connection:
    conn = sqlite3.connect(DB_PATH)
    conn.row_factory = sqlite3.Row
    conn.execute("PRAGMA journal_mode=WAL")
    return conn


def init_runs_table() -> None:
    with get_db() as conn:
        conn.execute(_CREATE_RUNS)
        conn.commit()


def start_run(name: str, kind: str, seed: int, out_dir: str) -> int:
    init_runs_table()
    with get_db() as conn:
        cur = conn.execute(
            """
            INSERT INTO runs (name, kind, seed, out_dir, status, started_at)
            VALUES (?, ?, ?, ?, 'running', ?)
            """,
            (name, kind, seed, out_dir, int(time.time())),
        )
        conn.commit()
        return int(cur.lastrowid or 0)


def finish_run(run_id: int, status: str, exit_code: int, headline: float | None = None) -> None:
    with get_db() as conn:
        conn.execute(
            """
            UPDATE runs
            SET status = ?, exit_code = ?, headline = ?, finished_at = ?
            WHERE run_id = ?
            """,
            (status, exit_code, headline, int(time.time()), run_id),
        )
        conn.commit()


def get_run(run_id: int) -> sqlite3.Row | None:
    init_runs_table()
    with get_db() as conn:
        return conn.execute("SELECT * FROM runs WHERE run_id = ?", (run_id,)).fetchone()


def list_runs(limit: int = 20) -> list[sqlite3.Row]:
    init_runs_table()
    with get_db() as conn:
        return conn.execute("SELECT * FROM runs ORDER BY run_id DESC LIMIT ?", (limit,)).fetchall()
