"""Execution-accuracy scoring, synthetic/gold overlap, and report assembly.

A prediction is correct when both its SQL and the gold SQL execute on the
registered database and their result sets match: bag semantics by default
(duplicates matter), order-sensitive only when the gold query has a
top-level ORDER BY, numerics compared with absolute tolerance so an integer
1 equals a real 1.0. Gold queries that themselves fail to execute are
excluded from the denominator with a warning rather than silently counted.
"""

from __future__ import annotations

import json
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from rotesql.catalog import DatabaseCatalog, column_count
from rotesql.errors import EvalError
from rotesql.sqlkit import lexer
from rotesql.sqlkit.execute import ERROR_TIMEOUT, validate_executable
from rotesql.sqlkit.match import string_canon, structural_key
from rotesql.errors import SqlLexError

log = logging.getLogger(__name__)

FLOAT_TOLERANCE = 1e-6
DEFAULT_EVAL_TIMEOUT = 30.0
DEFAULT_MIN_COLUMNS = 90

VERDICT_CORRECT = "correct"
VERDICT_WRONG_RESULT = "wrong_result"
VERDICT_EXEC_ERROR = "exec_error"
VERDICT_TIMEOUT = "timeout"
VERDICT_INVALID_GOLD = "invalid_gold"


@dataclass(frozen=True)
class Prediction:
    example_id: str
    db_id: str
    question: str
    predicted_sql: str
    gold_sql: str


@dataclass
class EvalReport:
    per_db: dict[str, tuple[int, int]]  # db_id -> (correct, total)
    micro: float
    macro: float
    errors: dict[str, int]
    invalid_gold: int
    verdicts: list[str] = field(default_factory=list)
    slice_label: str | None = None
    timeout: float = DEFAULT_EVAL_TIMEOUT
    set_semantics: bool = False

    def to_json(self) -> str:
        payload = {
            "per_db": {
                db: {"correct": c, "total": t, "accuracy": c / t if t else 0.0}
                for db, (c, t) in sorted(self.per_db.items())
            },
            "micro": self.micro,
            "macro": self.macro,
            "errors": self.errors,
            "invalid_gold": self.invalid_gold,
            "verdicts": self.verdicts,
            "slice": self.slice_label,
            "timeout": self.timeout,
            "row_semantics": "set" if self.set_semantics else "bag",
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def to_table(self) -> str:
        header = f"{'database':<28}{'correct':>9}{'total':>7}{'accuracy':>10}"
        lines = [header, "-" * len(header)]
        for db, (c, t) in sorted(self.per_db.items()):
            acc = c / t if t else 0.0
            lines.append(f"{db:<28}{c:>9}{t:>7}{acc:>10.3f}")
        lines.append("-" * len(header))
        lines.append(f"micro average: {self.micro:.3f}")
        lines.append(f"macro average: {self.macro:.3f}")
        if self.invalid_gold:
            lines.append(f"excluded (invalid gold): {self.invalid_gold}")
        return "\n".join(lines)


def _cell_key(cell):
    if cell is None:
        return (0, "")
    if isinstance(cell, bool):
        return (1, float(cell))
    if isinstance(cell, (int, float)):
        return (1, float(cell))
    if isinstance(cell, bytes):
        return (2, cell.hex())
    return (3, str(cell))


def _cells_equal(a, b) -> bool:
    ka, kb = _cell_key(a), _cell_key(b)
    if ka[0] != kb[0]:
        return False
    if ka[0] == 1:
        return abs(ka[1] - kb[1]) <= FLOAT_TOLERANCE
    return ka == kb


def _rows_equal(row_a, row_b) -> bool:
    if len(row_a) != len(row_b):
        return False
    return all(_cells_equal(a, b) for a, b in zip(row_a, row_b))


def result_match(
    a, b, order_sensitive: bool = False, set_semantics: bool = False
) -> bool:
    """Compare result sets: bag (default) or set, ordered when requested.

    Numeric cells compare with absolute tolerance 1e-6, so integer and real
    renderings of the same quantity match.
    """
    rows_a = [tuple(r) for r in a]
    rows_b = [tuple(r) for r in b]
    if set_semantics and not order_sensitive:
        rows_a = _dedup(rows_a)
        rows_b = _dedup(rows_b)
    if len(rows_a) != len(rows_b):
        return False
    if not order_sensitive:
        rows_a = sorted(rows_a, key=lambda r: tuple(_cell_key(c) for c in r))
        rows_b = sorted(rows_b, key=lambda r: tuple(_cell_key(c) for c in r))
    return all(_rows_equal(ra, rb) for ra, rb in zip(rows_a, rows_b))


def _dedup(rows):
    seen = set()
    out = []
    for row in rows:
        key = tuple(_cell_key(c) for c in row)
        if key not in seen:
            seen.add(key)
            out.append(row)
    return out


def has_top_level_order_by(sql: str) -> bool:
    try:
        toks = lexer.tokenize(sql)
    except SqlLexError:
        return False
    depth = 0
    for t in toks:
        if t.kind == lexer.PUNCT:
            depth += t.text == "("
            depth -= t.text == ")"
        elif depth == 0 and t.is_keyword("order"):
            return True
    return False


def _judge(
    pred: Prediction, db_path: str, timeout: float, set_semantics: bool
) -> str:
    gold = validate_executable(pred.gold_sql, db_path, timeout=timeout)
    if not gold.ok:
        log.warning(
            "gold SQL failed on %s (%s): %s",
            pred.example_id, gold.error_class, gold.error_message,
        )
        return VERDICT_INVALID_GOLD
    guess = validate_executable(pred.predicted_sql, db_path, timeout=timeout)
    if not guess.ok:
        if guess.error_class == ERROR_TIMEOUT:
            return VERDICT_TIMEOUT
        return VERDICT_EXEC_ERROR
    ordered = has_top_level_order_by(pred.gold_sql)
    if result_match(
        gold.rows, guess.rows, order_sensitive=ordered, set_semantics=set_semantics
    ):
        return VERDICT_CORRECT
    return VERDICT_WRONG_RESULT


def execution_accuracy(
    preds: list[Prediction],
    db_paths: dict[str, str],
    timeout: float = DEFAULT_EVAL_TIMEOUT,
    set_semantics: bool = False,
    max_workers: int = 4,
) -> EvalReport:
    """Score predictions by executing both sides read-only.

    Predictions are judged in parallel with one connection per query; the
    reduction into per-database tallies is sequential and deterministic.
    """
    if not preds:
        raise EvalError("no predictions to evaluate")
    missing = sorted({p.db_id for p in preds} - set(db_paths))
    if missing:
        raise EvalError(f"no database registered for: {', '.join(missing)}")

    def work(pred: Prediction) -> str:
        return _judge(pred, db_paths[pred.db_id], timeout, set_semantics)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            verdicts = list(pool.map(work, preds))
    else:
        verdicts = [work(p) for p in preds]

    per_db: dict[str, list[int]] = {}
    errors = {VERDICT_EXEC_ERROR: 0, VERDICT_WRONG_RESULT: 0, VERDICT_TIMEOUT: 0}
    invalid_gold = 0
    for pred, verdict in zip(preds, verdicts):
        if verdict == VERDICT_INVALID_GOLD:
            invalid_gold += 1
            continue
        tally = per_db.setdefault(pred.db_id, [0, 0])
        tally[1] += 1
        if verdict == VERDICT_CORRECT:
            tally[0] += 1
        else:
            errors[verdict] += 1
    totals = {db: (c, t) for db, (c, t) in per_db.items()}
    total_n = sum(t for _, t in totals.values())
    micro = sum(c for c, _ in totals.values()) / total_n if total_n else 0.0
    accs = [c / t for c, t in totals.values() if t]
    macro = sum(accs) / len(accs) if accs else 0.0
    return EvalReport(
        per_db=totals,
        micro=micro,
        macro=macro,
        errors=errors,
        invalid_gold=invalid_gold,
        verdicts=verdicts,
        timeout=timeout,
        set_semantics=set_semantics,
    )


def overlap_rate(synthetic, gold: list[str], matcher: str = "structural") -> float:
    """Percent of gold SQLs matched by any synthetic SQL under the matcher."""
    if not gold:
        raise EvalError("overlap rate is undefined for an empty gold set")
    sqls = [getattr(s, "sql", s) for s in synthetic]
    if matcher == "structural":
        keys = set()
        for sql in sqls:
            try:
                keys.add(structural_key(sql))
            except SqlLexError as exc:
                warnings.warn(f"skipping unparseable synthetic SQL: {exc}",
                              stacklevel=2)
        matched = 0
        for g in gold:
            try:
                matched += structural_key(g) in keys
            except SqlLexError as exc:
                warnings.warn(f"unparseable gold SQL never matches: {exc}",
                              stacklevel=2)
        return 100.0 * matched / len(gold)
    if matcher == "string":
        canon = {string_canon(sql) for sql in sqls}
        matched = sum(string_canon(g) in canon for g in gold)
        return 100.0 * matched / len(gold)
    raise EvalError(f"unknown matcher {matcher!r} (expected structural or string)")


def slice_large_db(
    preds: list[Prediction],
    catalogs: dict[str, DatabaseCatalog],
    min_columns: int = DEFAULT_MIN_COLUMNS,
) -> list[Prediction]:
    """Keep predictions whose database has at least min_columns columns."""
    missing = sorted({p.db_id for p in preds} - set(catalogs))
    if missing:
        raise EvalError(f"missing catalog for: {', '.join(missing)}")
    return [
        p for p in preds if column_count(catalogs[p.db_id]) >= min_columns
    ]


def load_predictions(path: str) -> list[Prediction]:
    preds: list[Prediction] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                preds.append(
                    Prediction(
                        example_id=str(record["example_id"]),
                        db_id=record["db_id"],
                        question=record.get("question", ""),
                        predicted_sql=record["predicted_sql"],
                        gold_sql=record["gold_sql"],
                    )
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise EvalError(f"{path}:{lineno}: bad prediction line: {exc}")
    return preds
