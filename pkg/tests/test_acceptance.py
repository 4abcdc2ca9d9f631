"""Release gates: one test per acceptance criterion, one verdict line each.

Every criterion runs at its stated tolerance and time budget. Checks that
need externally licensed data (Spider dev plus a reference tokenizer file)
skip with instructions unless the environment points at local copies:

    ROTESQL_SPIDER_DEV          path to Spider's dev.json
    ROTESQL_SPIDER_DB_DIR       directory holding <db_id>/<db_id>.sqlite
    ROTESQL_REFERENCE_TOKENIZER tokenizer.json used for reference counts

Verdict lines are printed in the terminal summary by a conftest hook, so
they appear even under default output capture.
"""

from __future__ import annotations

import json
import os
import random
import time
from contextlib import contextmanager
from pathlib import Path

import pytest

import fixture_data as fd
import oracles
import sqlgen
from fixture_data import build_db
from rotesql import genclient, promptkit, retriever
from rotesql.catalog import column_count, profile_database
from rotesql.dataset import AblationConfig, ablate, emit_dataset, mix
from rotesql.evalkit import Prediction, execution_accuracy, overlap_rate
from rotesql.genclient import ExecutionStatus, ProviderConfig, SynthPair
from rotesql.sqlkit.execute import validate_executable
from rotesql.sqlkit.skeleton import dedup_skeletons, extract_skeleton
from rotesql.tokens import load_counter

RESULTS: list[tuple[str, str]] = []


@contextmanager
def criterion(label: str):
    """Record one verdict line for the terminal summary."""
    try:
        yield
    except pytest.skip.Exception as exc:
        RESULTS.append((label, f"SKIP ({exc})"))
        raise
    except BaseException:
        RESULTS.append((label, "FAIL"))
        raise
    RESULTS.append((label, "PASS"))


def render_sets(
    pairs: list[tuple[str, object]], counter
) -> dict[str, list[promptkit.PromptRecord]]:
    sets: dict[str, list[promptkit.PromptRecord]] = {
        "id_only": [], "schema_only": [], "full_schema": [],
    }
    for question, catalog in pairs:
        sets["id_only"].append(
            promptkit.render_id_only(catalog.db_id, question, counter)
        )
        sets["schema_only"].append(
            promptkit.render_schema_only(catalog, question, counter)
        )
        sets["full_schema"].append(
            promptkit.render_full_schema(catalog, question, counter=counter)
        )
    return sets


def test_criterion_1_skeleton_fidelity():
    with criterion("criterion 1, skeleton fidelity"):
        started = time.monotonic()
        assert (
            extract_skeleton("select avg(unitprice) from track").template
            == "select avg(col_name) from table_name"
        )
        for sql in sqlgen.corpus(seed=1188, count=1000):
            template = extract_skeleton(sql).template
            assert extract_skeleton(template).template == template
        assert time.monotonic() - started < 5.0


def test_criterion_2_prompt_length_ordering(
    prompt_corpus, tokenizer_path, tmp_path
):
    with criterion("criterion 2, prompt-length ordering"):
        exact = load_counter(tokenizer_path)
        for counter in (None, exact):
            sets = render_sets(prompt_corpus, counter)
            assert len(sets["id_only"]) >= 20
            for short, schema, full in zip(
                sets["id_only"], sets["schema_only"], sets["full_schema"]
            ):
                assert short.token_count <= schema.token_count
                assert schema.token_count <= full.token_count

        base_cat = profile_database(
            build_db(tmp_path / "base.db", fd.wide_ddl("records", 95),
                     fd.wide_rows("records", 95)),
            "registry_wide",
        )
        doubled_cat = profile_database(
            build_db(tmp_path / "doubled.db", fd.wide_ddl("records", 190),
                     fd.wide_rows("records", 190)),
            "registry_wide",
        )
        assert column_count(doubled_cat) == 2 * column_count(base_cat)
        for question in fd.PROMPT_QUESTIONS["registry_wide"]:
            base = render_sets([(question, base_cat)], exact)
            doubled = render_sets([(question, doubled_cat)], exact)
            assert (
                base["id_only"][0].token_count
                == doubled["id_only"][0].token_count
            )
            assert (
                doubled["schema_only"][0].token_count
                > base["schema_only"][0].token_count
            )
            assert (
                doubled["full_schema"][0].token_count
                > base["full_schema"][0].token_count
            )


def spider_inputs() -> tuple[str, str, str]:
    dev = os.environ.get("ROTESQL_SPIDER_DEV")
    db_dir = os.environ.get("ROTESQL_SPIDER_DB_DIR")
    tokenizer = os.environ.get("ROTESQL_REFERENCE_TOKENIZER")
    if not (dev and db_dir and tokenizer):
        pytest.skip(
            "set ROTESQL_SPIDER_DEV, ROTESQL_SPIDER_DB_DIR,"
            " ROTESQL_REFERENCE_TOKENIZER to run reference-length checks"
        )
    return dev, db_dir, tokenizer


def spider_prompt_sets() -> dict[str, list[promptkit.PromptRecord]]:
    dev, db_dir, tokenizer = spider_inputs()
    counter = load_counter(tokenizer)
    with open(dev, encoding="utf-8") as fh:
        examples = json.load(fh)
    catalogs: dict[str, object] = {}
    pairs = []
    missing = 0
    for record in examples:
        db_id = record["db_id"]
        if db_id not in catalogs:
            db_path = Path(db_dir) / db_id / f"{db_id}.sqlite"
            catalogs[db_id] = (
                profile_database(str(db_path), db_id)
                if db_path.exists()
                else None
            )
        if catalogs[db_id] is None:
            missing += 1
            continue
        pairs.append((record["question"], catalogs[db_id]))
    if len(pairs) < len(examples) / 2:
        pytest.skip(f"{missing} of {len(examples)} dev databases missing")
    return render_sets(pairs, counter)


REFERENCE_MEANS = {"id_only": 41.0, "schema_only": 137.0, "full_schema": 713.0}


def test_criterion_2_reference_mean_lengths():
    with criterion("criterion 2 (optional), reference mean lengths"):
        sets = spider_prompt_sets()
        report = promptkit.cost_report(sets, counter_label="exact")
        for name, reference in REFERENCE_MEANS.items():
            mean = report.stats[name].mean
            assert 0.75 * reference <= mean <= 1.25 * reference, (
                f"{name} mean {mean:.1f} outside {reference} +/- 25%"
            )


def test_criterion_3_flops_savings(prompt_corpus):
    with criterion("criterion 3, FLOPS savings arithmetic"):
        def fixed(fmt: str, count: int) -> promptkit.PromptRecord:
            return promptkit.PromptRecord(
                format=promptkit.PromptFormat(fmt), text="x" * count,
                token_count=count, db_id="fleet", question="q",
            )

        report = promptkit.cost_report({
            "id_only": [fixed("id_only", 41)],
            "schema_only": [fixed("schema_only", 137)],
        })
        hand = 1.0 - 41.0 / 137.0
        got = report.savings["id_only vs schema_only"]["mean"]
        assert got == pytest.approx(hand, abs=1e-12)
        assert got == pytest.approx(0.7007, abs=5e-4)
        assert got == pytest.approx(oracles.savings(41.0, 137.0), abs=1e-12)
        flops_saving = oracles.savings(
            oracles.flops(promptkit.DEFAULT_PARAM_COUNT, 41.0),
            oracles.flops(promptkit.DEFAULT_PARAM_COUNT, 137.0),
        )
        assert got == pytest.approx(flops_saving, abs=1e-12)

        fixture_report = promptkit.cost_report(render_sets(prompt_corpus, None))
        table = fixture_report.to_table()
        for pair in ("id_only vs schema_only", "id_only vs full_schema"):
            assert pair in fixture_report.savings
            assert 0.0 < fixture_report.savings[pair]["p90"] < 1.0
            assert f"savings {pair}" in table


def test_criterion_3_p90_savings_band():
    with criterion("criterion 3 (optional), p90 savings band"):
        sets = spider_prompt_sets()
        report = promptkit.cost_report(sets, counter_label="exact")
        print(report.to_table())
        for pair in ("id_only vs schema_only", "id_only vs full_schema"):
            p90 = report.savings[pair]["p90"]
            assert 0.50 <= p90 <= 0.99, f"{pair} p90 saving {p90:.3f}"


def test_criterion_4_execution_accuracy_oracle(fleet_db, battles_db):
    with criterion("criterion 4, execution-accuracy oracle"):
        started = time.monotonic()
        db_paths = {"fleet": fleet_db, "battles": battles_db}
        preds = [
            Prediction(eid, db_id, question, pred, gold)
            for eid, db_id, question, gold, pred, _ in fd.EVAL_PAIRS
        ]
        report = execution_accuracy(preds, db_paths, timeout=1.0)
        assert report.verdicts == [v for *_, v in fd.EVAL_PAIRS]
        micro, macro = oracles.micro_macro(
            [(p.db_id, v) for p, v in zip(preds, report.verdicts)]
        )
        assert report.micro == micro == fd.EXPECTED_MICRO
        assert report.macro == macro == fd.EXPECTED_MACRO

        recipes = {
            "correct": ("SELECT 7", "SELECT 7"),
            "wrong_result": ("SELECT 7", "SELECT 8"),
            "exec_error": ("SELECT 7", "SELECT x FROM no_such_table"),
            "invalid_gold": ("SELECT x FROM ghost_table", "SELECT 7"),
        }
        rng = random.Random(44)
        for trial in range(100):
            rows = [
                (rng.choice(["fleet", "battles"]),
                 rng.choice(sorted(recipes)))
                for _ in range(rng.randint(2, 10))
            ]
            preds = [
                Prediction(f"r{trial}_{i}", db_id, "q",
                           recipes[verdict][1], recipes[verdict][0])
                for i, (db_id, verdict) in enumerate(rows)
            ]
            rep = execution_accuracy(preds, db_paths, timeout=1.0,
                                     max_workers=1)
            micro, macro = oracles.micro_macro(rows)
            assert rep.micro == micro
            assert rep.macro == macro
        assert time.monotonic() - started < 30.0


def test_criterion_5_overlap_checker():
    with criterion("criterion 5, overlap checker"):
        gold = [
            f"SELECT field_{i:03d} FROM records WHERE id = {i}"
            for i in range(200)
        ]
        synthetic = [
            "SELECT field_007 FROM records WHERE id = 424242",
            "SELECT count(*) FROM records",
            "SELECT field_007, field_008 FROM records",
        ]
        assert overlap_rate(synthetic, gold) == 0.5

        rng = random.Random(55)
        for _ in range(50):
            trial_gold = sqlgen.corpus(seed=rng.randrange(10**6), count=20)
            pool = sqlgen.corpus(seed=rng.randrange(10**6), count=10)
            pool += rng.sample(trial_gold, rng.randint(0, 5))
            rng.shuffle(pool)
            rates = [
                overlap_rate(pool[:size], trial_gold)
                for size in range(1, len(pool) + 1)
            ]
            assert all(a <= b for a, b in zip(rates, rates[1:]))


def test_criterion_6_retriever_failure_fidelity(values_db):
    with criterion("criterion 6, retriever failure fidelity"):
        index = retriever.build_value_index(values_db, db_id="sports")

        abbreviation = retriever.retrieve_values(
            "Which teams play in the American League?", index
        )
        assert "AL" not in {m.value for m in abbreviation}

        symbol = retriever.retrieve_values(
            "List compounds that are triple-bonded.", index
        )
        assert "#" not in {m.value for m in symbol}

        exact = retriever.retrieve_values(
            "How many students took PPT last year?", index
        )
        scores = {m.value: m.score for m in exact}
        assert scores.get("PPT") == 1.0


def test_criterion_7_synthesis_determinism(fleet_catalog, fleet_db, tmp_path):
    with criterion("criterion 7, synthesis pipeline"):
        started = time.monotonic()
        skeletons = dedup_skeletons(
            [extract_skeleton(sql) for sql in fd.SEED_SQL]
        )

        def run() -> genclient.SynthesisRun:
            return genclient.run_synthesis(
                fleet_catalog, skeletons, 100,
                ProviderConfig(seed=2026), db_path=fleet_db,
            )

        first = run()
        assert len(first.pairs) == 100
        assert first.manifest["shortfall"] == 0
        for pair in first.pairs:
            assert pair.execution_status.validated
            outcome = validate_executable(pair.sql, fleet_db, timeout=5.0)
            assert outcome.ok, f"{pair.sql!r}: {outcome.error_message}"

        second = run()
        path_a = tmp_path / "run_a.jsonl"
        path_b = tmp_path / "run_b.jsonl"
        genclient.write_pairs(first.pairs, str(path_a))
        genclient.write_pairs(second.pairs, str(path_b))
        assert path_a.read_bytes() == path_b.read_bytes()
        assert first.manifest == second.manifest
        assert time.monotonic() - started < 60.0


def test_criterion_8_ablation_compositions(tmp_path):
    with criterion("criterion 8, ablation compositions"):
        def pair(db_id: str, i: int) -> SynthPair:
            return SynthPair(
                db_id=db_id, nlq=f"Question {i} about {db_id}?",
                sql=f"SELECT {i} FROM t", skeleton_id=f"sk{i:03d}",
                model="mock", temperature=0.0, attempt=1,
                execution_status=ExecutionStatus(validated=True, row_count=1),
            )

        originals = [
            ("concert", f"Original question {i}?", f"SELECT {i}")
            for i in range(4)
        ]
        fleet_mix = mix([pair("fleet", i) for i in range(12)], originals, 7)
        battles_mix = mix([pair("battles", i) for i in range(6)], originals, 7)
        assert fleet_mix[1].counts == {"synthetic": 12, "original": 4}

        def variant(name: str, mixes):
            flags = {
                key: key == name
                for key in ("no_original", "no_synthetic", "no_db_id",
                            "single_model")
            }
            return ablate(AblationConfig(**flags), mixes)

        no_original = variant("no_original", [fleet_mix])
        assert len(no_original[0]) == 12
        assert no_original[1].counts == {"synthetic": 12, "original": 0}

        no_synthetic = variant("no_synthetic", [fleet_mix])
        assert len(no_synthetic[0]) == 4
        assert no_synthetic[1].counts == {"synthetic": 0, "original": 4}

        no_db_id = variant("no_db_id", [fleet_mix])
        assert len(no_db_id[0]) == 16
        assert no_db_id[1].counts == {"synthetic": 12, "original": 4}
        dataset_path = tmp_path / "no_db_id.jsonl"
        emit_dataset(no_db_id[0], str(dataset_path))
        lines = dataset_path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 16
        for line in lines:
            record = json.loads(line)
            assert "database: " not in record["prompt"]
            assert record["db_id"] is None

        merged = variant("single_model", [fleet_mix, battles_mix])
        assert len(merged[0]) == 22
        assert merged[1].counts == {"synthetic": 18, "original": 4}
        assert sorted(merged[1].targets) == ["battles", "fleet"]
        assert merged[1].expert_id == "expert-merged"
