"""The three competing prompt formats and their token/FLOPS cost report.

Formats, ordered by how much schema they carry:

- ID_ONLY: nothing but the database id and the question. Fixed template::

      database: {db_id}
      question: {question}
      SQL:

- SCHEMA_ONLY: single-line serialization listing table and column names
  (the linearization popularized by constrained-decoding text-to-SQL
  systems)::

      {question} | {db_id} | {table} : {col1}, {col2} | {table2} : ...

- FULL_SCHEMA: typed schema with sampled cell values, question-matched
  retrieved values, and explicit key relationships (the serialization
  popularized by schema-aware open-source text-to-SQL models), followed by
  the question.

The exact template strings here are the repository's documented formats;
`format_docs` returns them so CLI users can inspect what is being costed.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

from rotesql.catalog import DatabaseCatalog
from rotesql.errors import RotesqlError
from rotesql.tokens import HeuristicCounter, count_tokens

SAMPLES_SHOWN_PER_COLUMN = 2
DEFAULT_PARAM_COUNT = 7_000_000_000  # 7B-class decoder, the scale costed here


class PromptFormat(enum.Enum):
    ID_ONLY = "id_only"
    SCHEMA_ONLY = "schema_only"
    FULL_SCHEMA = "full_schema"


@dataclass(frozen=True)
class PromptRecord:
    format: PromptFormat
    text: str
    token_count: int
    db_id: str
    question: str


ID_ONLY_TEMPLATE = "database: {db_id}\nquestion: {question}\nSQL:"

_DEFAULT_COUNTER = HeuristicCounter()


def render_id_only(db_id: str, question: str, counter=None) -> PromptRecord:
    """Render the id-only prompt; byte-identical for equal (db_id, question)."""
    if not db_id or not question:
        raise RotesqlError("db_id and question must be non-empty")
    text = ID_ONLY_TEMPLATE.format(db_id=db_id, question=question)
    counter = counter or _DEFAULT_COUNTER
    return PromptRecord(
        format=PromptFormat.ID_ONLY,
        text=text,
        token_count=count_tokens(text, counter),
        db_id=db_id,
        question=question,
    )


def render_schema_only(
    catalog: DatabaseCatalog, question: str, counter=None
) -> PromptRecord:
    """Question plus bare table/column listing; no types, values, or keys."""
    if not catalog.tables:
        raise RotesqlError(f"catalog {catalog.db_id!r} has no tables to serialize")
    if not question:
        raise RotesqlError("question must be non-empty")
    parts = [question, catalog.db_id]
    for t in catalog.tables:
        cols = ", ".join(c.name for c in t.columns)
        parts.append(f"{t.name} : {cols}")
    text = " | ".join(parts)
    counter = counter or _DEFAULT_COUNTER
    return PromptRecord(
        format=PromptFormat.SCHEMA_ONLY,
        text=text,
        token_count=count_tokens(text, counter),
        db_id=catalog.db_id,
        question=question,
    )


def render_full_schema(
    catalog: DatabaseCatalog,
    question: str,
    retrieved: list[tuple[str, str]] | None = None,
    counter=None,
    samples_per_column: int = SAMPLES_SHOWN_PER_COLUMN,
) -> PromptRecord:
    """Typed schema + sampled values + retrieved values + key lines + question.

    ``retrieved`` holds ("table.column", "value") pairs from the value
    retriever and is reproduced verbatim in a matched-values block.
    """
    if not catalog.tables:
        raise RotesqlError(f"catalog {catalog.db_id!r} has no tables to serialize")
    if not question:
        raise RotesqlError("question must be non-empty")
    lines = [f"database: {catalog.db_id}", "schema:"]
    for t in catalog.tables:
        col_bits = []
        for c in t.columns:
            attrs = [c.declared_type.lower() or "any"]
            if c.is_primary_key:
                attrs.append("primary key")
            shown = [s.value for s in c.samples[:samples_per_column]]
            if shown:
                attrs.append("values: " + ", ".join(shown))
            col_bits.append(f"{t.name}.{c.name} ({' | '.join(attrs)})")
        lines.append(f"table {t.name}, columns = [{', '.join(col_bits)}]")
    if retrieved:
        pairs = ", ".join(f"{origin} = {value}" for origin, value in retrieved)
        lines.append(f"matched values: {pairs}")
    for t in catalog.tables:
        pk = [c.name for c in t.columns if c.is_primary_key]
        if pk:
            lines.append(f"primary key: {', '.join(f'{t.name}.{c}' for c in pk)}")
    for fk in catalog.foreign_keys:
        lines.append(
            f"foreign key: {fk.child_table}.{fk.child_column}"
            f" references {fk.parent_table}.{fk.parent_column}"
        )
    lines.append(f"question: {question}")
    lines.append("SQL:")
    text = "\n".join(lines)
    counter = counter or _DEFAULT_COUNTER
    return PromptRecord(
        format=PromptFormat.FULL_SCHEMA,
        text=text,
        token_count=count_tokens(text, counter),
        db_id=catalog.db_id,
        question=question,
    )


def format_docs() -> dict[str, str]:
    """The frozen template shapes, for documentation and CLI inspection."""
    return {
        PromptFormat.ID_ONLY.value: ID_ONLY_TEMPLATE,
        PromptFormat.SCHEMA_ONLY.value:
            "{question} | {db_id} | {table} : {col1}, {col2} | ...",
        PromptFormat.FULL_SCHEMA.value: (
            "database: {db_id}\nschema:\n"
            "table {t}, columns = [{t}.{col} ({type} | primary key |"
            " values: {v1}, {v2}), ...]\n"
            "matched values: {table.column} = {value}, ...\n"
            "primary key: {t}.{col}\n"
            "foreign key: {t}.{col} references {t2}.{col2}\n"
            "question: {question}\nSQL:"
        ),
    }


def nearest_rank_percentile(values: list[int] | list[float], pct: float) -> float:
    """Nearest-rank percentile: value at index ceil(pct/100 * n) (1-based)."""
    if not values:
        raise RotesqlError("percentile of an empty set")
    ordered = sorted(values)
    rank = max(1, math.ceil(pct / 100.0 * len(ordered)))
    return float(ordered[min(rank, len(ordered)) - 1])


@dataclass(frozen=True)
class FormatStats:
    mean: float
    median: float
    p90: float
    count: int

    def flops(self, param_count: int) -> dict[str, float]:
        # Linear prefill model: 2 * params * tokens. Attention's quadratic
        # term is ignored; fine for relative savings, stated in the report.
        return {
            "mean": 2.0 * param_count * self.mean,
            "median": 2.0 * param_count * self.median,
            "p90": 2.0 * param_count * self.p90,
        }


@dataclass(frozen=True)
class CostReport:
    stats: dict[str, FormatStats]
    param_count: int
    savings: dict[str, dict[str, float]]
    counter_label: str = "approximate"

    def to_json(self) -> str:
        payload = {
            "param_count": self.param_count,
            "counter": self.counter_label,
            "flops_model": "2 * param_count * tokens (prefill, linear)",
            "formats": {
                name: {
                    "count": s.count,
                    "mean_tokens": s.mean,
                    "median_tokens": s.median,
                    "p90_tokens": s.p90,
                    "flops": s.flops(self.param_count),
                }
                for name, s in self.stats.items()
            },
            "savings": self.savings,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def to_table(self) -> str:
        header = f"{'format':<14}{'n':>6}{'mean':>10}{'median':>10}{'p90':>10}"
        lines = [header, "-" * len(header)]
        for name, s in self.stats.items():
            lines.append(
                f"{name:<14}{s.count:>6}{s.mean:>10.1f}{s.median:>10.1f}{s.p90:>10.1f}"
            )
        lines.append("")
        lines.append(f"prompt FLOPS model: 2 * {self.param_count} * tokens"
                     f" ({self.counter_label} token counts)")
        for pair, vals in self.savings.items():
            lines.append(
                f"savings {pair}: mean {vals['mean'] * 100:.1f}%,"
                f" p90 {vals['p90'] * 100:.1f}%"
            )
        return "\n".join(lines)


def savings(cost_a: float, cost_b: float) -> float:
    """Fraction of B's cost that A avoids: 1 - cost_A / cost_B."""
    if cost_b == 0:
        raise RotesqlError("savings undefined against a zero-cost baseline")
    return 1.0 - cost_a / cost_b


def cost_report(
    prompt_sets: dict[str, list[PromptRecord]],
    param_count: int = DEFAULT_PARAM_COUNT,
    counter_label: str = "approximate",
) -> CostReport:
    """Token statistics per format plus pairwise savings at mean and p90.

    Set sizes may differ (a warning is the caller's concern); statistics are
    computed per set. Savings are reported for every ordered format pair
    where the first format is cheaper on average.
    """
    stats: dict[str, FormatStats] = {}
    for name, records in prompt_sets.items():
        if not records:
            raise RotesqlError(f"prompt set {name!r} is empty")
        counts = [r.token_count for r in records]
        stats[name] = FormatStats(
            mean=sum(counts) / len(counts),
            median=nearest_rank_percentile(counts, 50),
            p90=nearest_rank_percentile(counts, 90),
            count=len(counts),
        )
    pairwise: dict[str, dict[str, float]] = {}
    names = list(stats)
    for a in names:
        for b in names:
            if a == b:
                continue
            if stats[a].mean <= stats[b].mean:
                pairwise[f"{a} vs {b}"] = {
                    "mean": savings(stats[a].mean, stats[b].mean),
                    "p90": savings(stats[a].p90, stats[b].p90),
                }
    return CostReport(
        stats=stats,
        param_count=param_count,
        savings=pairwise,
        counter_label=counter_label,
    )
