# Folder: platter/pl_drivers/storage
# File:   run_store.py

from __future__ import annotations

import json
import os
import sqlite3
import threading
from pathlib import Path
from typing import Any, Dict, List, Optional

__all__ = ["db_path", "record_run", "list_runs", "get_run", "close_connections"]

_CONN_LOCK = threading.Lock()
# one open connection per database file
_CONNS: Dict[str, sqlite3.Connection] = {}


def db_path() -> str:
    explicit = os.getenv("PLATTER_DB")
    if explicit:
        return explicit
    root = Path(os.getenv("PLATTER_OUTPUT_ROOT", "./runs"))
    root.mkdir(parents=True, exist_ok=True)
    return str(root / "platter_runs.db")


def _connect(path: str) -> sqlite3.Connection:
    conn = sqlite3.connect(path, check_same_thread=False)
    conn.execute("PRAGMA journal_mode = WAL")
    conn.execute(
        """
        CREATE TABLE IF NOT EXISTS runs(
            run_id        TEXT PRIMARY KEY,
            command       TEXT NOT NULL,
            exit_status   INTEGER NOT NULL,
            manifest_path TEXT,
            output_dir    TEXT,
            wall_time     REAL NOT NULL,
            started_at    TEXT NOT NULL,
            metrics_json  TEXT NOT NULL DEFAULT '{}'
        )
        """
    )
    return conn


def _conn(path: Optional[str] = None) -> sqlite3.Connection:
    """Cached connection for `path`; callers hold _CONN_LOCK."""
    key = path or db_path()
    conn = _CONNS.get(key)
    if conn is None:
        conn = _CONNS[key] = _connect(key)
    return conn


def close_connections() -> None:
    with _CONN_LOCK:
        while _CONNS:
            _, conn = _CONNS.popitem()
            conn.close()


def record_run(
    run_id: str,
    command: str,
    exit_status: int,
    manifest_path: Optional[str],
    output_dir: Optional[str],
    wall_time: float,
    started_at: str,
    metrics: Optional[Dict[str, Any]] = None,
    path: Optional[str] = None,
) -> None:
    blob = json.dumps(metrics or {}, ensure_ascii=False, separators=(",", ":"), default=str)
    with _CONN_LOCK:
        with _conn(path) as c:
            c.execute(
                """
                INSERT INTO runs(run_id, command, exit_status, manifest_path, output_dir, wall_time, started_at, metrics_json)
                VALUES (?,?,?,?,?,?,?,?)
                ON CONFLICT(run_id) DO UPDATE SET
                  exit_status = excluded.exit_status,
                  manifest_path = excluded.manifest_path,
                  wall_time = excluded.wall_time,
                  metrics_json = excluded.metrics_json
                """,
                (run_id, command, int(exit_status), manifest_path, output_dir, float(wall_time), started_at, blob),
            )


def _row(r: tuple) -> Dict[str, Any]:
    run_id, command, status, manifest, out_dir, wall, started, metrics = r
    return {
        "run_id": run_id,
        "command": command,
        "exit_status": status,
        "manifest_path": manifest,
        "output_dir": out_dir,
        "wall_time": wall,
        "started_at": started,
        "metrics": json.loads(metrics or "{}"),
    }


def list_runs(limit: int = 20, command: Optional[str] = None, path: Optional[str] = None) -> List[Dict[str, Any]]:
    sql = "SELECT run_id, command, exit_status, manifest_path, output_dir, wall_time, started_at, metrics_json FROM runs"
    args: List[Any] = []
    if command:
        sql += " WHERE command=?"
        args.append(command)
    sql += " ORDER BY started_at DESC, rowid DESC LIMIT ?"
    args.append(int(limit))
    with _CONN_LOCK:
        with _conn(path) as c:
            rows = c.execute(sql, args).fetchall()
    return [_row(r) for r in rows]


def get_run(run_id: str, path: Optional[str] = None) -> Optional[Dict[str, Any]]:
    with _CONN_LOCK:
        with _conn(path) as c:
            r = c.execute(
                "SELECT run_id, command, exit_status, manifest_path, output_dir, wall_time, started_at, metrics_json FROM runs WHERE run_id=?",
                (run_id,),
            ).fetchone()
    return _row(r) if r else None
