"""Prompt rendering and the token/FLOPS cost report."""

from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from rotesql.errors import RotesqlError
from rotesql.promptkit import (
    ID_ONLY_TEMPLATE,
    PromptFormat,
    cost_report,
    format_docs,
    nearest_rank_percentile,
    render_full_schema,
    render_id_only,
    render_schema_only,
    savings,
)
from rotesql.tokens import HeuristicCounter


class TestIdOnly:
    def test_exact_template(self):
        record = render_id_only("concert_singer", "How many singers do we have?")
        assert record.text == (
            "database: concert_singer\n"
            "question: How many singers do we have?\n"
            "SQL:"
        )
        assert record.format is PromptFormat.ID_ONLY

    def test_template_constant_matches(self):
        assert ID_ONLY_TEMPLATE == "database: {db_id}\nquestion: {question}\nSQL:"

    def test_rejects_empty(self):
        with pytest.raises(RotesqlError):
            render_id_only("", "q")
        with pytest.raises(RotesqlError):
            render_id_only("db", "")

    def test_no_schema_leakage(self, battles_catalog):
        record = render_id_only("battles", "Which battles were decisive?")
        for table in battles_catalog.tables:
            for col in table.columns:
                assert col.name not in record.text.replace("battles", "")


class TestSchemaOnly:
    def test_exact_serialization(self, fleet_catalog):
        record = render_schema_only(fleet_catalog, "How many ships are there?")
        assert record.text == (
            "How many ships are there? | fleet | "
            "ship : id, name, tonnage, lost_in_battle"
        )

    def test_two_table_order(self, battles_catalog):
        record = render_schema_only(battles_catalog, "q?")
        assert record.text == (
            "q? | battles | battle : id, name, date, result | "
            "ship : id, name, tonnage, lost_in_battle"
        )

    def test_no_values_or_types(self, battles_catalog):
        record = render_schema_only(battles_catalog, "q?")
        assert "decisive" not in record.text
        assert "REAL" not in record.text and "real" not in record.text

    def test_empty_catalog_rejected(self):
        from rotesql.catalog import DatabaseCatalog

        with pytest.raises(RotesqlError):
            render_schema_only(DatabaseCatalog(db_id="empty"), "q?")


class TestFullSchema:
    def test_contains_all_blocks(self, battles_catalog):
        record = render_full_schema(
            battles_catalog,
            "Which battles claimed ships?",
            retrieved=[("battle.result", "decisive")],
        )
        text = record.text
        assert text.startswith("database: battles\nschema:\n")
        assert "table battle, columns = [" in text
        assert "battle.id (integer | primary key" in text
        assert "battle.result (text | values: decisive, indecisive)" in text
        assert "matched values: battle.result = decisive" in text
        assert "primary key: battle.id" in text
        assert "primary key: ship.id" in text
        assert (
            "foreign key: ship.lost_in_battle references battle.id" in text
        )
        assert text.endswith("question: Which battles claimed ships?\nSQL:")

    def test_samples_capped_at_two(self, battles_catalog):
        record = render_full_schema(battles_catalog, "q?")
        # battle.name has four distinct values; only two may be shown.
        line = next(
            ln for ln in record.text.splitlines() if ln.startswith("table battle")
        )
        assert line.count("Trafalgar") <= 1
        shown = [v for v in ("Trafalgar", "Jutland", "Midway", "Leyte Gulf")
                 if v in line]
        assert len(shown) == 2

    def test_retrieved_block_absent_without_matches(self, battles_catalog):
        record = render_full_schema(battles_catalog, "q?")
        assert "matched values" not in record.text

    def test_monotone_token_ordering(self, battles_catalog):
        counter = HeuristicCounter()
        q = "Which battles claimed at least two ships?"
        id_only = render_id_only("battles", q, counter)
        schema = render_schema_only(battles_catalog, q, counter)
        full = render_full_schema(battles_catalog, q, counter=counter)
        assert id_only.token_count <= schema.token_count <= full.token_count


class TestFormatDocs:
    def test_covers_all_formats(self):
        docs = format_docs()
        assert set(docs) == {f.value for f in PromptFormat}
        assert docs["id_only"] == ID_ONLY_TEMPLATE


class TestPercentile:
    def test_hand_examples(self):
        # Nearest-rank: ceil(p/100 * n)-th smallest, 1-based.
        assert nearest_rank_percentile([1, 2, 3, 4], 50) == 2
        assert nearest_rank_percentile([1, 2, 3, 4], 90) == 4
        assert nearest_rank_percentile([5], 90) == 5
        assert nearest_rank_percentile([3, 1, 2], 100) == 3
        assert nearest_rank_percentile([10, 20], 1) == 10

    def test_rejects_empty(self):
        with pytest.raises(RotesqlError):
            nearest_rank_percentile([], 50)

    @settings(max_examples=150, deadline=None)
    @given(
        st.lists(st.integers(min_value=0, max_value=10_000), min_size=1,
                 max_size=40),
        st.floats(min_value=1, max_value=100),
    )
    def test_matches_oracle(self, values, pct):
        assert nearest_rank_percentile(values, pct) == oracles.nearest_rank(
            values, pct
        )


class TestSavings:
    def test_reference_hand_arithmetic(self):
        # Mean-level check: 1 - 41/137 with both routes.
        assert savings(41, 137) == pytest.approx(1 - 41 / 137)
        assert savings(41, 137) == pytest.approx(oracles.savings(41, 137))
        assert savings(41, 137) == pytest.approx(0.7007, abs=5e-4)

    def test_zero_baseline_rejected(self):
        with pytest.raises(RotesqlError):
            savings(1, 0)

    def test_flops_cancel_in_savings(self):
        params = 7_000_000_000
        assert savings(
            oracles.flops(params, 41), oracles.flops(params, 137)
        ) == pytest.approx(savings(41, 137))


class TestCostReport:
    def _records(self, counts, fmt=PromptFormat.ID_ONLY):
        from rotesql.promptkit import PromptRecord

        return [
            PromptRecord(fmt, "x", c, "db", "q") for c in counts
        ]

    def test_stats_and_savings(self):
        report = cost_report(
            {
                "id_only": self._records([40, 41, 42]),
                "schema_only": self._records([130, 137, 144]),
            },
            param_count=1000,
        )
        id_stats = report.stats["id_only"]
        assert id_stats.mean == 41
        assert id_stats.median == 41
        assert id_stats.p90 == 42
        key = "id_only vs schema_only"
        assert key in report.savings
        assert report.savings[key]["mean"] == pytest.approx(1 - 41 / 137)
        assert report.savings[key]["p90"] == pytest.approx(1 - 42 / 144)
        assert "schema_only vs id_only" not in report.savings

    def test_flops_scale_linearly(self):
        report = cost_report({"id_only": self._records([10])}, param_count=100)
        flops = report.stats["id_only"].flops(100)
        assert flops["mean"] == 2 * 100 * 10
        assert flops["mean"] == oracles.flops(100, 10)

    def test_empty_set_rejected(self):
        with pytest.raises(RotesqlError):
            cost_report({"id_only": []})

    def test_json_and_table_render(self):
        report = cost_report(
            {
                "id_only": self._records([40, 41]),
                "full_schema": self._records([700, 713]),
            }
        )
        assert "savings" in report.to_json()
        table = report.to_table()
        assert "id_only" in table and "full_schema" in table
        assert "%" in table

    def test_aggregates_match_brute_force(self):
        rng = random.Random(11)
        counts = [rng.randint(5, 900) for _ in range(57)]
        report = cost_report({"fmt": self._records(counts)})
        s = report.stats["fmt"]
        assert s.mean == pytest.approx(sum(counts) / len(counts))
        assert s.median == oracles.nearest_rank(counts, 50)
        assert s.p90 == oracles.nearest_rank(counts, 90)
        assert s.count == len(counts)
        assert math.isclose(
            s.flops(3)["p90"], oracles.flops(3, oracles.nearest_rank(counts, 90))
        )
