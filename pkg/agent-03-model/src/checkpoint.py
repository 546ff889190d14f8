#!/usr/bin/env python3
"""
MATANet — Checkpoints

A checkpoint is a ``torch.save`` container of primitives and tensors only,
so it loads with ``weights_only=True``:

    format_version    int
    model_config      ModelConfig.to_dict()
    terminal_ids      terminal label space, in class-index order
    level_spaces      {str(rank): node ids in class-index order}
    parameter_order   state_dict keys in module registration order
    state_dict        parameters and buffers
    optimizer_state   AdamW state_dict or None
    rng_state         torch CPU generator state
    train_state       {epoch, step, ...} for resuming
    train_config      resolved training config
    taxonomy          taxonomy node records the label spaces refer to

Files are written to a temporary sibling and renamed into place.

Encoder weights can also be exported alone; this is the hook through
which externally trained backbones are loaded.

Dependencies:
    pip install torch
"""

from __future__ import annotations

import logging
import os
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import torch

from .config import EncoderConfig, ModelConfig
from .network import MATANet, build_model

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
ENCODER_FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Unreadable checkpoint, version mismatch, or label-space mismatch."""


@dataclass
class Checkpoint:
    model_config: ModelConfig
    terminal_ids: tuple[int, ...]
    level_spaces: dict[int, tuple[int, ...]]
    state_dict: "OrderedDict[str, torch.Tensor]"
    parameter_order: tuple[str, ...] = ()
    optimizer_state: dict[str, Any] | None = None
    rng_state: torch.Tensor | None = None
    train_state: dict[str, Any] = field(default_factory=dict)
    train_config: dict[str, Any] = field(default_factory=dict)
    taxonomy: list[dict[str, Any]] = field(default_factory=list)

    def build_model(self) -> MATANet:
        model = build_model(self.model_config, seed=0)
        model.load_state_dict(self.state_dict)
        return model


def _atomic_save(obj: Any, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    torch.save(obj, tmp)
    os.replace(tmp, path)


def save_checkpoint(
    path: str | Path,
    model: MATANet,
    terminal_ids: Sequence[int],
    level_spaces: Mapping[int, Sequence[int]],
    optimizer: torch.optim.Optimizer | None = None,
    train_state: Mapping[str, Any] | None = None,
    train_config: Mapping[str, Any] | None = None,
    taxonomy: Sequence[Mapping[str, Any]] = (),
) -> Path:
    path = Path(path)
    state = model.state_dict()
    payload = {
        "format_version": FORMAT_VERSION,
        "model_config": model.config.to_dict(),
        "terminal_ids": [int(t) for t in terminal_ids],
        "level_spaces": {str(rank): [int(n) for n in ids] for rank, ids in sorted(level_spaces.items())},
        "parameter_order": list(state.keys()),
        "state_dict": state,
        "optimizer_state": optimizer.state_dict() if optimizer is not None else None,
        "rng_state": torch.get_rng_state(),
        "train_state": dict(train_state or {}),
        "train_config": dict(train_config or {}),
        "taxonomy": [dict(record) for record in taxonomy],
    }
    _atomic_save(payload, path)
    logger.info("Wrote checkpoint %s", path)
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"Checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"{path}: unreadable checkpoint ({exc})") from None
    version = payload.get("format_version") if isinstance(payload, dict) else None
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: format version {version!r}, expected {FORMAT_VERSION}")
    state = payload["state_dict"]
    order = tuple(payload.get("parameter_order", ()))
    if order and tuple(state.keys()) != order:
        raise CheckpointError(f"{path}: parameter order does not match the stored order")
    return Checkpoint(
        model_config=ModelConfig.from_dict(payload["model_config"]),
        terminal_ids=tuple(payload["terminal_ids"]),
        level_spaces={int(rank): tuple(ids) for rank, ids in payload["level_spaces"].items()},
        state_dict=OrderedDict(state),
        parameter_order=order,
        optimizer_state=payload.get("optimizer_state"),
        rng_state=payload.get("rng_state"),
        train_state=dict(payload.get("train_state") or {}),
        train_config=dict(payload.get("train_config") or {}),
        taxonomy=list(payload.get("taxonomy") or []),
    )


# ---------------------------------------------------------------------------
# Encoder weights
# ---------------------------------------------------------------------------


def export_encoder_weights(model: MATANet, path: str | Path) -> Path:
    path = Path(path)
    payload = {
        "format_version": ENCODER_FORMAT_VERSION,
        "encoder_config": model.config.encoder.to_dict(),
        "roi_encoder": model.roi_encoder.state_dict(),
        "context_encoders": {key: enc.state_dict() for key, enc in model.context_encoders.items()},
    }
    _atomic_save(payload, path)
    logger.info("Wrote encoder weights %s", path)
    return path


def load_encoder_weights(model: MATANet, path: str | Path) -> None:
    """Copy exported encoder weights into ``model``.  A single exported
    context encoder is broadcast to every scale of a per-scale model."""
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"Encoder weights not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if payload.get("format_version") != ENCODER_FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported encoder weight format {payload.get('format_version')!r}")
    stored = EncoderConfig(**payload["encoder_config"])
    current = model.config.encoder
    shape_fields = ("image_side", "patch_size", "embed_dim", "depth", "heads")
    if any(getattr(stored, f) != getattr(current, f) for f in shape_fields):
        raise CheckpointError(f"{path}: encoder shape {stored.to_dict()} does not match model {current.to_dict()}")

    model.roi_encoder.load_state_dict(payload["roi_encoder"])
    contexts = payload["context_encoders"]
    for key, encoder in model.context_encoders.items():
        if key in contexts:
            encoder.load_state_dict(contexts[key])
        elif len(contexts) == 1:
            encoder.load_state_dict(next(iter(contexts.values())))
        else:
            raise CheckpointError(f"{path}: no weights for context encoder {key!r}")
    logger.info("Loaded encoder weights from %s", path)
