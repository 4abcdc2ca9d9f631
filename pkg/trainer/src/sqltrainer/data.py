"""Training files and completion-masked batches.

The input format is the line-oriented JSON emitted by the dataset-assembly
tooling: db_id, prompt, completion, source, weight per line. A training
sequence is prompt + newline + completion + end-of-sequence; every prompt
position is labeled IGNORE_INDEX so the loss sees completion tokens only.
Rows whose prompt alone fills the token budget contribute no supervised
positions and are dropped with a warning.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import torch

from sqltrainer.errors import DataError

IGNORE_INDEX = -100
PROMPT_SEPARATOR = "\n"


@dataclass(frozen=True)
class TrainRow:
    db_id: str | None
    prompt: str
    completion: str
    source: str
    weight: float = 1.0

    def __post_init__(self) -> None:
        if not self.prompt or not self.completion:
            raise DataError("prompt and completion must be non-empty")
        if self.weight <= 0:
            raise DataError("weight must be positive")


@dataclass(frozen=True)
class EncodedRow:
    input_ids: list[int]
    labels: list[int]
    weight: float

    @property
    def supervised_tokens(self) -> int:
        return sum(label != IGNORE_INDEX for label in self.labels)


def load_rows(path: str) -> list[TrainRow]:
    rows: list[TrainRow] = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}")
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                rows.append(
                    TrainRow(
                        db_id=record.get("db_id"),
                        prompt=record["prompt"],
                        completion=record["completion"],
                        source=record.get("source", "unknown"),
                        weight=float(record.get("weight", 1.0)),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: bad training line: {exc}")
    if not rows:
        raise DataError(f"{path}: no training rows")
    return rows


def load_tokenizer(model_path: str, tokenizer_file: str | None = None):
    """Tokenizer from an explicit file or the model directory.

    Serving and training share this loader so both sides agree on padding
    and end-of-sequence handling. A missing pad token falls back to the
    end-of-sequence token; a missing end-of-sequence token is an error
    because generation could never stop.
    """
    from transformers import AutoTokenizer, PreTrainedTokenizerFast

    try:
        if tokenizer_file:
            tokenizer = PreTrainedTokenizerFast(
                tokenizer_file=tokenizer_file, eos_token="</s>"
            )
        else:
            tokenizer = AutoTokenizer.from_pretrained(model_path)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot load tokenizer: {exc}")
    if tokenizer.eos_token_id is None:
        raise DataError("tokenizer defines no end-of-sequence token")
    if tokenizer.pad_token_id is None:
        tokenizer.pad_token = tokenizer.eos_token
    return tokenizer


def encode_row(row: TrainRow, tokenizer, max_tokens: int) -> EncodedRow:
    prompt_ids = tokenizer(
        row.prompt + PROMPT_SEPARATOR, add_special_tokens=False
    )["input_ids"]
    completion_ids = tokenizer(row.completion, add_special_tokens=False)[
        "input_ids"
    ] + [tokenizer.eos_token_id]
    input_ids = (prompt_ids + completion_ids)[:max_tokens]
    labels = ([IGNORE_INDEX] * len(prompt_ids) + completion_ids)[:max_tokens]
    return EncodedRow(input_ids=input_ids, labels=labels, weight=row.weight)


def encode_rows(
    rows: list[TrainRow], tokenizer, max_tokens: int
) -> list[EncodedRow]:
    encoded = []
    dropped = 0
    for row in rows:
        item = encode_row(row, tokenizer, max_tokens)
        if item.supervised_tokens == 0:
            dropped += 1
            continue
        encoded.append(item)
    if dropped:
        warnings.warn(
            f"dropped {dropped} rows whose prompts exhaust max_tokens",
            stacklevel=2,
        )
    if not encoded:
        raise DataError("no rows with supervised tokens under max_tokens")
    return encoded


def collate(batch: list[EncodedRow], pad_id: int) -> dict[str, torch.Tensor]:
    """Right-pad a batch; labels pad with IGNORE_INDEX, never with pad_id."""
    if not batch:
        raise DataError("empty batch")
    width = max(len(item.input_ids) for item in batch)
    input_ids = torch.full((len(batch), width), pad_id, dtype=torch.long)
    labels = torch.full((len(batch), width), IGNORE_INDEX, dtype=torch.long)
    attention_mask = torch.zeros((len(batch), width), dtype=torch.long)
    for i, item in enumerate(batch):
        n = len(item.input_ids)
        input_ids[i, :n] = torch.tensor(item.input_ids, dtype=torch.long)
        labels[i, :n] = torch.tensor(item.labels, dtype=torch.long)
        attention_mask[i, :n] = 1
    weights = torch.tensor([item.weight for item in batch], dtype=torch.float)
    return {
        "input_ids": input_ids,
        "labels": labels,
        "attention_mask": attention_mask,
        "weights": weights,
    }
