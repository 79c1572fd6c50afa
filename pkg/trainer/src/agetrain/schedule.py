"""Learning-rate schedule: cosine decay with exact endpoints."""

from __future__ import annotations

import math

from .errors import UsageError


def cosine_lr(epoch: int, total_epochs: int, lr_init: float, lr_final: float) -> float:
    """Learning rate for `epoch` in 0..total_epochs-1.

    Exactly lr_init at epoch 0 and lr_final at the last epoch, monotone
    non-increasing in between. A single-epoch run stays at lr_init.
    """
    if total_epochs < 1:
        raise UsageError(f"total_epochs must be >= 1, got {total_epochs}")
    if not 0 <= epoch < total_epochs:
        raise UsageError(f"epoch {epoch} outside 0..{total_epochs - 1}")
    if total_epochs == 1:
        return lr_init
    t = epoch / (total_epochs - 1)
    return lr_final + (lr_init - lr_final) * 0.5 * (1.0 + math.cos(math.pi * t))
