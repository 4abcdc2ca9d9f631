"""Database introspection into an immutable schema-plus-samples model.

profile_database is the single source of truth downstream: prompt rendering,
the value retriever, the mock generator, and large-database slicing all read
the catalog rather than touching the database file again.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass

from rotesql.errors import CatalogError
from rotesql.sqlkit.execute import open_readonly

log = logging.getLogger(__name__)

DEFAULT_SAMPLE_CAP = 10


@dataclass(frozen=True)
class CellSample:
    """One sampled cell value, rendered exactly as prompts will display it."""

    value: str
    frequency_rank: int


@dataclass(frozen=True)
class ColumnMeta:
    name: str
    declared_type: str
    is_primary_key: bool = False
    samples: tuple[CellSample, ...] = ()


@dataclass(frozen=True)
class TableMeta:
    name: str
    columns: tuple[ColumnMeta, ...]
    row_count: int = 0


@dataclass(frozen=True)
class ForeignKey:
    child_table: str
    child_column: str
    parent_table: str
    parent_column: str


@dataclass(frozen=True)
class DatabaseCatalog:
    db_id: str
    tables: tuple[TableMeta, ...] = ()
    foreign_keys: tuple[ForeignKey, ...] = ()
    source_path: str = ""

    def table(self, name: str) -> TableMeta:
        for t in self.tables:
            if t.name.lower() == name.lower():
                return t
        raise KeyError(name)


def render_cell(value) -> str:
    """Text rendering reused verbatim in prompts and retrieval.

    Numbers drop a trailing ``.0`` so 2.0 displays as 2; text is untouched.
    """
    if isinstance(value, float):
        if value == int(value) and abs(value) < 1e15:
            return str(int(value))
        return repr(value)
    return str(value)


def _column_samples(conn, table: str, column: str, cap: int) -> tuple[CellSample, ...]:
    quoted_t = table.replace('"', '""')
    quoted_c = column.replace('"', '""')
    rows = conn.execute(f'select "{quoted_c}" from "{quoted_t}"').fetchall()
    counts: Counter = Counter()
    first_seen: dict = {}
    for idx, (cell,) in enumerate(rows):
        if cell is None or isinstance(cell, bytes):
            continue  # NULLs and blobs cannot appear as SQL text literals
        counts[cell] += 1
        first_seen.setdefault(cell, idx)
    ranked = sorted(counts, key=lambda v: (-counts[v], first_seen[v]))
    return tuple(
        CellSample(value=render_cell(v), frequency_rank=rank)
        for rank, v in enumerate(ranked[:cap], start=1)
    )


def profile_database(
    path: str, db_id: str, sample_cap: int = DEFAULT_SAMPLE_CAP
) -> DatabaseCatalog:
    """Introspect one SQLite file: tables, columns, keys, sampled values.

    Deterministic for a fixed file and cap. Zero user tables is a warning
    state, not an error; an unreadable or corrupt file raises CatalogError.
    """
    if not db_id:
        raise CatalogError("db_id must be non-empty")
    if sample_cap <= 0:
        raise CatalogError("sample_cap must be positive")
    conn = open_readonly(path)
    try:
        names = [
            r[0]
            for r in conn.execute(
                "select name from sqlite_master"
                " where type='table' and name not like 'sqlite_%'"
            )
        ]
        tables: list[TableMeta] = []
        fks: list[ForeignKey] = []
        for name in names:
            quoted = name.replace('"', '""')
            info = conn.execute(f'pragma table_info("{quoted}")').fetchall()
            columns = tuple(
                ColumnMeta(
                    name=col_name,
                    declared_type=declared or "",
                    is_primary_key=bool(pk),
                    samples=_column_samples(conn, name, col_name, sample_cap),
                )
                for _, col_name, declared, _, _, pk in info
            )
            row_count = conn.execute(f'select count(*) from "{quoted}"').fetchone()[0]
            tables.append(TableMeta(name=name, columns=columns, row_count=row_count))
        by_name = {t.name: t for t in tables}
        for t in tables:
            quoted = t.name.replace('"', '""')
            for _, _, parent, child_col, parent_col, *_ in conn.execute(
                f'pragma foreign_key_list("{quoted}")'
            ):
                target = by_name.get(parent)
                if target is None:
                    log.warning(
                        "skipping foreign key %s.%s -> missing table %s",
                        t.name, child_col, parent,
                    )
                    continue
                if parent_col is None:
                    pk_cols = [c.name for c in target.columns if c.is_primary_key]
                    parent_col = pk_cols[0] if pk_cols else target.columns[0].name
                fks.append(ForeignKey(t.name, child_col, parent, parent_col))
    finally:
        conn.close()
    if not tables:
        log.warning("database %s contains no user tables", path)
    return DatabaseCatalog(
        db_id=db_id,
        tables=tuple(tables),
        foreign_keys=tuple(fks),
        source_path=str(path),
    )


def column_count(catalog: DatabaseCatalog) -> int:
    return sum(len(t.columns) for t in catalog.tables)


def save_catalog(catalog: DatabaseCatalog, path: str) -> None:
    """Write one database header line, then one line per table."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "record": "database",
            "db_id": catalog.db_id,
            "source_path": catalog.source_path,
            "foreign_keys": [
                [fk.child_table, fk.child_column, fk.parent_table, fk.parent_column]
                for fk in catalog.foreign_keys
            ],
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for t in catalog.tables:
            record = {
                "record": "table",
                "name": t.name,
                "row_count": t.row_count,
                "columns": [
                    {
                        "name": c.name,
                        "declared_type": c.declared_type,
                        "is_primary_key": c.is_primary_key,
                        "samples": [[s.value, s.frequency_rank] for s in c.samples],
                    }
                    for c in t.columns
                ],
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def load_catalog(path: str) -> DatabaseCatalog:
    tables: list[TableMeta] = []
    header: dict | None = None
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise CatalogError(f"cannot read catalog {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CatalogError(f"{path}:{lineno}: bad catalog line: {exc}")
            if record.get("record") == "database":
                header = record
            elif record.get("record") == "table":
                tables.append(
                    TableMeta(
                        name=record["name"],
                        row_count=record["row_count"],
                        columns=tuple(
                            ColumnMeta(
                                name=c["name"],
                                declared_type=c["declared_type"],
                                is_primary_key=c["is_primary_key"],
                                samples=tuple(
                                    CellSample(value=v, frequency_rank=r)
                                    for v, r in c["samples"]
                                ),
                            )
                            for c in record["columns"]
                        ),
                    )
                )
            else:
                raise CatalogError(f"{path}:{lineno}: unknown record kind")
    if header is None:
        raise CatalogError(f"{path}: missing database header line")
    return DatabaseCatalog(
        db_id=header["db_id"],
        tables=tuple(tables),
        foreign_keys=tuple(ForeignKey(*fk) for fk in header["foreign_keys"]),
        source_path=header["source_path"],
    )
