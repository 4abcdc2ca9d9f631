"""Low-rank adapters on named linear layers, implemented directly.

An adapted layer computes base(x) + (alpha / r) * B(A(x)) with A drawn from
the usual Kaiming-uniform fan-in init and B zeroed, so the wrapped model is
bit-identical to the frozen base until the first optimizer step. Merging
folds (alpha / r) * B @ A back into the base weight and restores plain
linear modules, so a merged checkpoint serves without any adapter code.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from sqltrainer.errors import TrainerError


class LoraLinear(nn.Module):
    def __init__(self, base: nn.Linear, r: int, alpha: int) -> None:
        super().__init__()
        self.base = base
        self.r = r
        self.scaling = alpha / r
        self.lora_a = nn.Parameter(
            torch.empty(r, base.in_features, dtype=base.weight.dtype)
        )
        self.lora_b = nn.Parameter(
            torch.zeros(base.out_features, r, dtype=base.weight.dtype)
        )
        nn.init.kaiming_uniform_(self.lora_a, a=math.sqrt(5))
        for param in self.base.parameters():
            param.requires_grad = False

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        update = nn.functional.linear(nn.functional.linear(x, self.lora_a),
                                      self.lora_b)
        return self.base(x) + self.scaling * update

    def merged_weight(self) -> torch.Tensor:
        return self.base.weight + self.scaling * (self.lora_b @ self.lora_a)


def apply_lora(
    model: nn.Module, targets: tuple[str, ...], r: int, alpha: int
) -> int:
    """Freeze the model and wrap every targeted linear; returns the count."""
    for param in model.parameters():
        param.requires_grad = False
    wrapped = 0
    for module in list(model.modules()):
        for attr, child in list(module.named_children()):
            if attr in targets and isinstance(child, nn.Linear):
                setattr(module, attr, LoraLinear(child, r, alpha))
                wrapped += 1
    if wrapped == 0:
        raise TrainerError(
            f"no linear modules named {', '.join(targets)} found to adapt"
        )
    return wrapped


def merge_adapters(model: nn.Module) -> int:
    """Fold every adapter into its base layer and unwrap; returns the count."""
    merged = 0
    for module in list(model.modules()):
        for attr, child in list(module.named_children()):
            if isinstance(child, LoraLinear):
                with torch.no_grad():
                    child.base.weight.copy_(child.merged_weight())
                setattr(module, attr, child.base)
                merged += 1
    return merged


def trainable_parameters(model: nn.Module) -> list[nn.Parameter]:
    return [p for p in model.parameters() if p.requires_grad]


def parameter_counts(model: nn.Module) -> tuple[int, int]:
    """(trainable, total) parameter counts."""
    trainable = sum(p.numel() for p in model.parameters() if p.requires_grad)
    total = sum(p.numel() for p in model.parameters())
    return trainable, total
