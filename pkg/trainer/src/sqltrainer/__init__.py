"""Fine-tuning and serving glue for small SQL generation models."""

from sqltrainer.data import IGNORE_INDEX, PROMPT_SEPARATOR, TrainRow
from sqltrainer.errors import DataError, SpecError, TrainerError
from sqltrainer.lora import LoraLinear, apply_lora, merge_adapters
from sqltrainer.serve import build_app
from sqltrainer.spec import FAMILY_PRESETS, TrainSpec, for_family
from sqltrainer.train import TrainResult, train

__all__ = [
    "FAMILY_PRESETS",
    "IGNORE_INDEX",
    "PROMPT_SEPARATOR",
    "DataError",
    "LoraLinear",
    "SpecError",
    "TrainerError",
    "TrainResult",
    "TrainRow",
    "TrainSpec",
    "apply_lora",
    "build_app",
    "for_family",
    "merge_adapters",
    "train",
]
