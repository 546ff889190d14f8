#!/usr/bin/env python3
"""
MATANet — Level Heads and Objective

One two-layer classifier per supervised taxonomy rank, all reading the
fused embedding z, plus the terminal classifier and the training
objective:

    L_hier  = sum over supervised ranks of CE(f_rank(z), y_rank)
    L_total = L_cls + L_hier

No weighting, no label smoothing.

Dependencies:
    pip install torch
"""

from __future__ import annotations

import logging
import math
from typing import Mapping, Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F

logger = logging.getLogger(__name__)


class LabelRangeError(ValueError):
    """A target index falls outside its head's class range."""


class DivergenceError(RuntimeError):
    """Non-finite loss; carries the annotation ids of the offending batch."""

    def __init__(self, message: str, batch_ids: Sequence[int] = ()):
        super().__init__(message)
        self.batch_ids = list(batch_ids)


def two_layer_classifier(in_dim: int, num_classes: int, hidden_dim: int | None = None) -> nn.Sequential:
    hidden = hidden_dim or in_dim
    return nn.Sequential(nn.Linear(in_dim, hidden), nn.GELU(), nn.Linear(hidden, num_classes))


class LevelHeads(nn.Module):
    """``heads[str(rank)]`` classifies z into the rank's label space."""

    def __init__(self, in_dim: int, level_sizes: Mapping[int, int]):
        super().__init__()
        self.level_sizes = dict(sorted(level_sizes.items()))
        self.heads = nn.ModuleDict({str(rank): two_layer_classifier(in_dim, size) for rank, size in self.level_sizes.items()})

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(self.level_sizes)

    def forward(self, z: torch.Tensor) -> dict[int, torch.Tensor]:
        return {rank: self.heads[str(rank)](z) for rank in self.level_sizes}


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def _check_range(targets: torch.Tensor, num_classes: int, where: str) -> None:
    if targets.numel() and (int(targets.min()) < 0 or int(targets.max()) >= num_classes):
        raise LabelRangeError(
            f"{where}: target index range [{int(targets.min())}, {int(targets.max())}] "
            f"outside 0..{num_classes - 1}"
        )


def classification_loss(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    _check_range(targets, logits.shape[-1], "terminal classifier")
    return F.cross_entropy(logits, targets)


def level_losses(level_logits: Mapping[int, torch.Tensor], level_targets: Mapping[int, torch.Tensor]) -> dict[int, torch.Tensor]:
    losses = {}
    for rank, logits in level_logits.items():
        if rank not in level_targets:
            raise LabelRangeError(f"No targets supplied for the rank-{rank} head")
        targets = level_targets[rank]
        _check_range(targets, logits.shape[-1], f"rank-{rank} head")
        losses[rank] = F.cross_entropy(logits, targets)
    return losses


def hslm_forward(
    z: torch.Tensor, level_targets: Mapping[int, torch.Tensor], heads: LevelHeads
) -> tuple[torch.Tensor, dict[int, torch.Tensor]]:
    """Per-level cross-entropies and their unweighted sum."""
    losses = level_losses(heads(z), level_targets)
    if not losses:
        return z.new_zeros(()), losses
    return torch.stack(list(losses.values())).sum(), losses


def total_loss(l_cls: torch.Tensor, l_hier: torch.Tensor, batch_ids: Sequence[int] = ()) -> torch.Tensor:
    values = (float(l_cls.detach()), float(l_hier.detach()))
    if not all(math.isfinite(v) for v in values):
        logger.error("Non-finite loss (l_cls=%s, l_hier=%s) in batch %s", values[0], values[1], list(batch_ids))
        raise DivergenceError(
            f"Non-finite loss (l_cls={values[0]}, l_hier={values[1]}) in batch {list(batch_ids)}",
            batch_ids,
        )
    return l_cls + l_hier
