"""Read-only SQL execution with timeouts and classified failures.

Used both by the synthesis filter (drop generations that error) and by the
evaluator (compare result sets). Connections are opened with the SQLite
read-only URI mode so no caller can mutate a benchmark database.
"""

from __future__ import annotations

import sqlite3
import time
from dataclasses import dataclass

from rotesql.errors import CatalogError

ERROR_SYNTAX = "syntax"
ERROR_MISSING_IDENTIFIER = "missing_identifier"
ERROR_TIMEOUT = "timeout"
ERROR_OTHER = "other"

_MISSING_MARKERS = (
    "no such table",
    "no such column",
    "no such function",
    "ambiguous column name",
)
DEFAULT_TIMEOUT = 30.0
_PROGRESS_OPCODES = 200  # check the deadline every N VM instructions


@dataclass(frozen=True)
class ExecutionOutcome:
    """Result of running one statement: rows on success, classified error otherwise."""

    ok: bool
    rows: tuple[tuple, ...] = ()
    wall_time: float = 0.0
    error_class: str | None = None
    error_message: str | None = None

    @property
    def row_count(self) -> int:
        return len(self.rows)


def open_readonly(db_path: str) -> sqlite3.Connection:
    """Open a SQLite file read-only; CatalogError if missing or not a database."""
    try:
        conn = sqlite3.connect(f"file:{db_path}?mode=ro", uri=True)
        conn.execute("select 1 from sqlite_master limit 1").fetchall()
    except sqlite3.Error as exc:
        raise CatalogError(f"cannot open database {db_path!r}: {exc}") from exc
    return conn


def classify_error(exc: Exception) -> str:
    message = str(exc).lower()
    if "interrupted" in message:
        return ERROR_TIMEOUT
    if "syntax error" in message or "incomplete input" in message:
        return ERROR_SYNTAX
    if any(marker in message for marker in _MISSING_MARKERS):
        return ERROR_MISSING_IDENTIFIER
    return ERROR_OTHER


def validate_executable(
    sql: str, db: str, timeout: float = DEFAULT_TIMEOUT
) -> ExecutionOutcome:
    """Run one statement read-only, returning rows or a classified error.

    Timeouts are enforced with a progress-handler deadline and come back as
    their own error class so callers can choose between filtering and retry.
    """
    try:
        conn = open_readonly(db)
    except CatalogError as exc:
        return ExecutionOutcome(
            ok=False, error_class=ERROR_OTHER, error_message=str(exc)
        )
    deadline = time.monotonic() + timeout

    def _check_deadline() -> int:
        return 1 if time.monotonic() > deadline else 0

    conn.set_progress_handler(_check_deadline, _PROGRESS_OPCODES)
    started = time.monotonic()
    try:
        rows = conn.execute(sql).fetchall()
        elapsed = time.monotonic() - started
        return ExecutionOutcome(
            ok=True, rows=tuple(tuple(r) for r in rows), wall_time=elapsed
        )
    except sqlite3.Error as exc:
        elapsed = time.monotonic() - started
        return ExecutionOutcome(
            ok=False,
            wall_time=elapsed,
            error_class=classify_error(exc),
            error_message=str(exc),
        )
    finally:
        conn.close()
