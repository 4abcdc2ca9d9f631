"""Session fixtures: a tiny local causal LM and a 50-row training file.

The model is a standard Llama architecture shrunk far below 100M params
and initialized locally, with a word-level tokenizer trained on the
fixture corpus, so every test runs offline. When sqltrainer is not
installed this whole directory is skipped at collection, which keeps the
core toolkit's suite independent of the trainer package.
"""

from __future__ import annotations

import importlib.util
import json
import sys
from pathlib import Path

import pytest

HAVE_TRAINER = importlib.util.find_spec("sqltrainer") is not None

collect_ignore_glob = [] if HAVE_TRAINER else ["test_*.py"]

TABLES = ["ship", "battle", "port", "crew", "cargo"]
COLUMNS = ["name", "tonnage", "year", "result", "captain"]
PROMPT_TEMPLATE = "database: {db_id}\nquestion: {question}\nSQL:"


def fixture_rows(count: int = 50) -> list[dict]:
    """Deterministic training rows in the dataset-assembly line format."""
    rows = []
    for i in range(count):
        table = TABLES[i % len(TABLES)]
        column = COLUMNS[(i // len(TABLES)) % len(COLUMNS)]
        question = f"how many {table} rows have {column} above {i}"
        rows.append(
            {
                "db_id": "fleet",
                "prompt": PROMPT_TEMPLATE.format(db_id="fleet", question=question),
                "completion": f"select count ( * ) from {table} where {column} > {i}",
                "source": "synthetic" if i % 5 else "original",
                "weight": 1.0,
            }
        )
    return rows


@pytest.fixture(scope="session")
def dataset_rows() -> list[dict]:
    return fixture_rows()


@pytest.fixture(scope="session")
def dataset_file(tmp_path_factory, dataset_rows) -> str:
    path = tmp_path_factory.mktemp("data") / "train.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for row in dataset_rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return str(path)


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory, dataset_rows) -> str:
    """Directory holding a freshly initialized sub-100M model + tokenizer."""
    import torch
    from tokenizers import Tokenizer, models, pre_tokenizers, trainers
    from transformers import (
        LlamaConfig,
        LlamaForCausalLM,
        PreTrainedTokenizerFast,
    )

    out = tmp_path_factory.mktemp("model")
    corpus = [r["prompt"] for r in dataset_rows]
    corpus += [r["completion"] for r in dataset_rows]

    word_level = Tokenizer(models.WordLevel(unk_token="[UNK]"))
    word_level.pre_tokenizer = pre_tokenizers.Whitespace()
    trainer = trainers.WordLevelTrainer(special_tokens=["[PAD]", "[UNK]", "</s>"])
    word_level.train_from_iterator(corpus, trainer)
    word_level.save(str(out / "wordlevel.json"))

    tokenizer = PreTrainedTokenizerFast(
        tokenizer_file=str(out / "wordlevel.json"),
        pad_token="[PAD]",
        unk_token="[UNK]",
        eos_token="</s>",
    )
    tokenizer.save_pretrained(out)

    torch.manual_seed(7)
    config = LlamaConfig(
        vocab_size=len(tokenizer),
        hidden_size=128,
        intermediate_size=256,
        num_hidden_layers=2,
        num_attention_heads=4,
        num_key_value_heads=4,
        max_position_embeddings=256,
        pad_token_id=tokenizer.pad_token_id,
        eos_token_id=tokenizer.eos_token_id,
        bos_token_id=tokenizer.eos_token_id,
    )
    model = LlamaForCausalLM(config)
    assert sum(p.numel() for p in model.parameters()) < 100_000_000
    model.save_pretrained(out)
    return str(out)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print the trainer acceptance verdicts alongside the core ones."""
    module = sys.modules.get("test_trainer_e2e")
    results = getattr(module, "RESULTS", [])
    if not results:
        return
    terminalreporter.section("acceptance criteria (trainer)")
    for label, verdict in results:
        terminalreporter.write_line(f"{label}: {verdict}")


@pytest.fixture(scope="session")
def trained_dir(tmp_path_factory, tiny_model_dir, dataset_file) -> str:
    """One shared 10-step training run reused by loop, serve, and e2e tests."""
    from sqltrainer.spec import TrainSpec
    from sqltrainer.train import train

    out = tmp_path_factory.mktemp("ckpt") / "run"
    spec = TrainSpec(
        model_path=tiny_model_dir,
        dataset_path=dataset_file,
        output_dir=str(out),
        steps=10,
        batch_size=8,
        learning_rate=5e-3,
        max_tokens=64,
        seed=11,
    )
    result = train(spec)
    manifest_path = Path(result.output_dir) / "train_manifest.json"
    assert manifest_path.exists()
    return result.output_dir
