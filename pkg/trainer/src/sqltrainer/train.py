"""Completion-masked fine-tuning with an explicit optimization loop.

The loss is written out rather than delegated: next-token cross entropy
over positions whose label is not IGNORE_INDEX, each row scaled by its
dataset weight, averaged over supervised tokens. The schedule is linear
warmup into cosine decay. After an adapter run the adapters are merged, so
the saved checkpoint is a plain model directory that serving and any
downstream loader can open without this package.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn

from sqltrainer.data import (
    IGNORE_INDEX,
    collate,
    encode_rows,
    load_rows,
    load_tokenizer,
)
from sqltrainer.errors import TrainerError
from sqltrainer.lora import apply_lora, merge_adapters, parameter_counts
from sqltrainer.spec import TrainSpec

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    losses: list[float]
    output_dir: str
    rows: int
    trainable_params: int
    total_params: int
    adapted_modules: int = 0

    @property
    def first_loss(self) -> float:
        return self.losses[0]

    @property
    def last_loss(self) -> float:
        return self.losses[-1]


def schedule_multiplier(step: int, total_steps: int, warmup_ratio: float) -> float:
    """Linear warmup for the first warmup_ratio of steps, cosine decay after."""
    warmup_steps = max(1, int(round(total_steps * warmup_ratio)))
    if step < warmup_steps:
        return (step + 1) / warmup_steps
    if total_steps == warmup_steps:
        return 1.0
    progress = (step - warmup_steps) / (total_steps - warmup_steps)
    return 0.5 * (1.0 + math.cos(math.pi * progress))


def weighted_completion_loss(
    logits: torch.Tensor, labels: torch.Tensor, weights: torch.Tensor
) -> torch.Tensor:
    """Next-token cross entropy over supervised positions only.

    Positions labeled IGNORE_INDEX (all prompt tokens and padding) carry no
    gradient; each row's token losses scale by the row weight.
    """
    shifted_logits = logits[:, :-1, :]
    shifted_labels = labels[:, 1:]
    per_token = nn.functional.cross_entropy(
        shifted_logits.reshape(-1, shifted_logits.size(-1)),
        shifted_labels.reshape(-1),
        ignore_index=IGNORE_INDEX,
        reduction="none",
    ).reshape(shifted_labels.shape)
    mask = (shifted_labels != IGNORE_INDEX).float()
    weighted = per_token * mask * weights[:, None]
    denom = (mask * weights[:, None]).sum()
    if denom.item() == 0:
        raise TrainerError("batch holds no supervised tokens")
    return weighted.sum() / denom


def train(spec: TrainSpec) -> TrainResult:
    from transformers import AutoModelForCausalLM

    torch.manual_seed(spec.seed)
    tokenizer = load_tokenizer(spec.model_path, spec.tokenizer_file)
    try:
        model = AutoModelForCausalLM.from_pretrained(spec.model_path)
    except OSError as exc:
        raise TrainerError(f"cannot load model from {spec.model_path}: {exc}")
    model.train()

    adapted = 0
    if spec.use_lora:
        adapted = apply_lora(
            model, spec.lora_targets, spec.lora_r, spec.lora_alpha
        )
    trainable, total = parameter_counts(model)
    if trainable == 0:
        raise TrainerError("nothing to train: every parameter is frozen")

    rows = load_rows(spec.dataset_path)
    encoded = encode_rows(rows, tokenizer, spec.max_tokens)
    order = list(range(len(encoded)))
    random.Random(spec.seed).shuffle(order)

    optimizer = torch.optim.AdamW(
        (p for p in model.parameters() if p.requires_grad),
        lr=spec.learning_rate,
        weight_decay=spec.weight_decay,
    )

    losses: list[float] = []
    cursor = 0
    for step in range(spec.steps):
        picks = []
        for _ in range(min(spec.batch_size, len(encoded))):
            picks.append(encoded[order[cursor]])
            cursor = (cursor + 1) % len(order)
        batch = collate(picks, tokenizer.pad_token_id)
        outputs = model(
            input_ids=batch["input_ids"],
            attention_mask=batch["attention_mask"],
        )
        loss = weighted_completion_loss(
            outputs.logits, batch["labels"], batch["weights"]
        )
        optimizer.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(
            (p for p in model.parameters() if p.requires_grad),
            spec.max_grad_norm,
        )
        for group in optimizer.param_groups:
            group["lr"] = spec.learning_rate * schedule_multiplier(
                step, spec.steps, spec.warmup_ratio
            )
        optimizer.step()
        losses.append(float(loss.detach()))
        if spec.log_every and (step + 1) % spec.log_every == 0:
            log.info("step %d/%d loss %.4f", step + 1, spec.steps, losses[-1])

    if spec.use_lora:
        merge_adapters(model)

    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out)
    tokenizer.save_pretrained(out)
    manifest = {
        "spec": spec.to_json(),
        "rows": len(encoded),
        "adapted_modules": adapted,
        "trainable_params": trainable,
        "total_params": total,
        "first_loss": losses[0],
        "last_loss": losses[-1],
        "losses": losses,
    }
    with open(out / "train_manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return TrainResult(
        losses=losses,
        output_dir=str(out),
        rows=len(encoded),
        trainable_params=trainable,
        total_params=total,
        adapted_modules=adapted,
    )
