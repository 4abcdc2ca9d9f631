"""String-matching cell-value retrieval for full-schema prompts.

The matcher is deliberately coarse: a candidate cell value is retrieved when
the question shares a long-enough contiguous substring with it (longest
common substring divided by the value's length). That reproduces the
documented behavior of production string matchers, including their failure
modes: an abbreviation stored in the database ("AL") is not found in a
question that spells it out ("American League"), and a symbol value ("#") is
never aligned with the word that denotes it ("triple-bonded").
"""

from __future__ import annotations

import hashlib
import json
import string
from dataclasses import dataclass

from rotesql.catalog import render_cell
from rotesql.errors import RotesqlError
from rotesql.sqlkit.execute import open_readonly

DEFAULT_THRESHOLD = 0.85
DEFAULT_TOP_K = 5
DEFAULT_MAX_VALUES_PER_COLUMN = 100
NORMALIZATION_RULE = "casefold+strip-punct+collapse-ws/v1"

_TEXT_TYPE_MARKERS = ("char", "text", "clob", "string", "enum")


@dataclass(frozen=True)
class ValueMatch:
    table: str
    column: str
    value: str
    matched_span: tuple[int, int]
    score: float


@dataclass(frozen=True)
class ValueIndex:
    db_id: str
    # normalized value -> sorted list of (table, column) origins
    origins: dict[str, tuple[tuple[str, str], ...]]
    # normalized value -> original rendering for prompt display
    originals: dict[str, str]
    content_hash: str
    normalization_rule: str = NORMALIZATION_RULE

    def values(self) -> list[str]:
        return list(self.origins)


def normalize_value(text: str) -> str:
    collapsed = " ".join(text.split())
    return collapsed.strip(string.punctuation + " ").casefold() or collapsed.casefold()


def _is_texty(declared_type: str) -> bool:
    low = declared_type.lower()
    if not low:
        return False
    return any(marker in low for marker in _TEXT_TYPE_MARKERS)


def file_content_hash(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def build_value_index(
    db_path: str,
    db_id: str = "",
    max_values_per_column: int = DEFAULT_MAX_VALUES_PER_COLUMN,
) -> ValueIndex:
    """Index distinct values of text-typed columns, most frequent first."""
    if max_values_per_column <= 0:
        raise RotesqlError("max_values_per_column must be positive")
    conn = open_readonly(db_path)
    origins: dict[str, list[tuple[str, str]]] = {}
    originals: dict[str, str] = {}
    try:
        tables = [
            r[0]
            for r in conn.execute(
                "select name from sqlite_master"
                " where type='table' and name not like 'sqlite_%'"
            )
        ]
        for table in tables:
            quoted_t = table.replace('"', '""')
            info = conn.execute(f'pragma table_info("{quoted_t}")').fetchall()
            for _, col, declared, *_ in info:
                if not _is_texty(declared or ""):
                    continue
                quoted_c = col.replace('"', '""')
                rows = conn.execute(
                    f'select "{quoted_c}", count(*) as n from "{quoted_t}"'
                    f' where "{quoted_c}" is not null'
                    f' group by "{quoted_c}" order by n desc, rowid'
                    f" limit {int(max_values_per_column)}"
                ).fetchall()
                for cell, _count in rows:
                    if isinstance(cell, bytes):
                        continue
                    rendered = render_cell(cell)
                    norm = normalize_value(rendered)
                    if not norm:
                        continue
                    origins.setdefault(norm, []).append((table, col))
                    originals.setdefault(norm, rendered)
    finally:
        conn.close()
    return ValueIndex(
        db_id=db_id,
        origins={k: tuple(sorted(set(v))) for k, v in origins.items()},
        originals=originals,
        content_hash=file_content_hash(db_path),
    )


def save_index(index: ValueIndex, path: str) -> None:
    payload = {
        "db_id": index.db_id,
        "content_hash": index.content_hash,
        "normalization_rule": index.normalization_rule,
        "entries": [
            {
                "value": norm,
                "original": index.originals[norm],
                "origins": [list(o) for o in index.origins[norm]],
            }
            for norm in sorted(index.origins)
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)


def load_index(path: str) -> ValueIndex:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return ValueIndex(
        db_id=payload["db_id"],
        origins={
            e["value"]: tuple(tuple(o) for o in e["origins"])
            for e in payload["entries"]
        },
        originals={e["value"]: e["original"] for e in payload["entries"]},
        content_hash=payload["content_hash"],
        normalization_rule=payload["normalization_rule"],
    )


def _longest_common_substring(a: str, b: str) -> tuple[int, int]:
    """Return (length, end_index_in_a) of the longest common substring."""
    if not a or not b:
        return 0, 0
    best = 0
    best_end_a = 0
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        ai = a[i - 1]
        for j in range(1, len(b) + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
                if cur[j] > best:
                    best = cur[j]
                    best_end_a = i
        prev = cur
    return best, best_end_a


def retrieve_values(
    question: str,
    index: ValueIndex,
    top_k: int = DEFAULT_TOP_K,
    threshold: float = DEFAULT_THRESHOLD,
) -> list[ValueMatch]:
    """Match question spans against indexed values.

    Score = longest-common-substring length / value length, both casefolded.
    Results are ranked by score, then value length (longer is more
    specific), then origin, and cut at top_k; ties are ordered totally so
    top_k=k results are always a prefix of top_k=k+1 results.
    """
    if not (0.0 < threshold <= 1.0):
        raise RotesqlError("threshold must be in (0, 1]")
    if top_k <= 0:
        return []
    q = question.casefold()
    if not q.strip():
        return []
    scored: list[tuple] = []
    for norm, origin_list in index.origins.items():
        length, end_a = _longest_common_substring(q, norm)
        score = length / len(norm)
        if score < threshold or length == 0:
            continue
        span = (end_a - length, end_a)
        for table, column in origin_list:
            scored.append(
                (-score, -len(norm), table, column, norm,
                 ValueMatch(
                     table=table,
                     column=column,
                     value=index.originals[norm],
                     matched_span=span,
                     score=score,
                 ))
            )
    scored.sort(key=lambda item: item[:5])
    return [item[5] for item in scored[:top_k]]
