"""Training specification: every knob as validated data, presets included.

Two model-family presets carry the published full-fine-tune settings
(Mistral-7B-class: 300 steps at 2e-6; LLaMA-13B-class: 500 steps at 2e-5,
both at batch 128 with 4% warmup into cosine decay and a 4096-token trim).
Adapter runs replace the learning rate with the LoRA default 2e-4 unless
the caller sets one explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from sqltrainer.errors import SpecError

LORA_LEARNING_RATE = 2e-4

FAMILY_PRESETS: dict[str, dict[str, float | int]] = {
    "mistral-7b-class": {"steps": 300, "batch_size": 128, "learning_rate": 2e-6},
    "llama-13b-class": {"steps": 500, "batch_size": 128, "learning_rate": 2e-5},
}


@dataclass
class TrainSpec:
    model_path: str
    dataset_path: str
    output_dir: str
    tokenizer_file: str | None = None
    steps: int = 300
    batch_size: int = 128
    learning_rate: float = 2e-6
    warmup_ratio: float = 0.04
    weight_decay: float = 0.0
    max_grad_norm: float = 1.0
    max_tokens: int = 4096
    use_lora: bool = False
    lora_r: int = 128
    lora_alpha: int = 128
    lora_targets: tuple[str, ...] = ("q_proj", "k_proj", "v_proj", "o_proj")
    seed: int = 0
    log_every: int = 10

    def __post_init__(self) -> None:
        if self.steps <= 0:
            raise SpecError("steps must be positive")
        if self.batch_size <= 0:
            raise SpecError("batch_size must be positive")
        if self.learning_rate <= 0:
            raise SpecError("learning_rate must be positive")
        if not 0.0 <= self.warmup_ratio < 1.0:
            raise SpecError("warmup_ratio must lie in [0, 1)")
        if self.max_tokens <= 0:
            raise SpecError("max_tokens must be positive")
        if self.use_lora:
            if self.lora_r <= 0 or self.lora_alpha <= 0:
                raise SpecError("lora_r and lora_alpha must be positive")
            if not self.lora_targets:
                raise SpecError("use_lora requires at least one target module")

    def to_json(self) -> dict:
        payload = {
            "model_path": self.model_path,
            "dataset_path": self.dataset_path,
            "output_dir": self.output_dir,
            "steps": self.steps,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "warmup_ratio": self.warmup_ratio,
            "weight_decay": self.weight_decay,
            "max_grad_norm": self.max_grad_norm,
            "max_tokens": self.max_tokens,
            "use_lora": self.use_lora,
            "seed": self.seed,
        }
        if self.use_lora:
            payload["lora"] = {
                "r": self.lora_r,
                "alpha": self.lora_alpha,
                "targets": list(self.lora_targets),
            }
        return payload


def for_family(family: str, use_lora: bool = False, **overrides) -> TrainSpec:
    """Build a spec from a family preset; explicit overrides always win."""
    try:
        preset = dict(FAMILY_PRESETS[family])
    except KeyError:
        known = ", ".join(sorted(FAMILY_PRESETS))
        raise SpecError(f"unknown model family {family!r} (known: {known})")
    if use_lora and "learning_rate" not in overrides:
        preset["learning_rate"] = LORA_LEARNING_RATE
    preset.update(overrides)
    return TrainSpec(use_lora=use_lora, **preset)
