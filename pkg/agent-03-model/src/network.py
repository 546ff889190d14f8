#!/usr/bin/env python3
"""
MATANet — Network Assembly

ROI encoder -> g; context encoder(s) -> p_r per scale; MCEAM (or the
ROI-only projection) -> z; the terminal classifier and the level heads
read z.

Context encoders are shared across scales by default
(``EncoderConfig.shared_context_encoder``); otherwise every scale gets
its own.  ``EncoderConfig.freeze`` stops gradients into all encoders.

Usage:
    model = build_model(ModelConfig(num_classes=12, level_sizes={1: 3, 2: 6}), seed=0)
    out = model(roi_batch, [("3", c3_batch), ("5", c5_batch), ("full", full_batch)])

Dependencies:
    pip install torch
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import torch
import torch.nn as nn

from .config import ModelConfig
from .encoder import EncoderOutput, PatchEncoder, ShapeError
from .hslm import LevelHeads, two_layer_classifier
from .mceam import MCEAM, RoiOnlyFusion

logger = logging.getLogger(__name__)


@dataclass
class MATANetOutput:
    logits: torch.Tensor  # B x K
    z: torch.Tensor  # B x D_z
    attention: dict[str, torch.Tensor]  # scale -> B x heads x N
    level_logits: dict[int, torch.Tensor]  # rank -> B x K_rank


class MATANet(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        enc = config.encoder
        self.roi_encoder = PatchEncoder(enc)
        if config.roi_only:
            self.context_encoders = nn.ModuleDict()
            self.fusion: nn.Module = RoiOnlyFusion(enc.embed_dim, config.fused_dim)
        else:
            if enc.shared_context_encoder:
                self.context_encoders = nn.ModuleDict({"shared": PatchEncoder(enc)})
            else:
                self.context_encoders = nn.ModuleDict({scale: PatchEncoder(enc) for scale in config.scales})
            self.fusion = MCEAM(
                enc.embed_dim,
                config.scales,
                fused_dim=config.fused_dim,
                heads=config.fusion_heads,
                depth=config.fusion_blocks,
            )
        self.classifier = two_layer_classifier(config.fused_dim, config.num_classes)
        self.level_heads = LevelHeads(config.fused_dim, config.level_sizes)
        self.reset_parameters()
        if enc.freeze:
            for module in self.encoders():
                module.requires_grad_(False)

    # -- structure ----------------------------------------------------------

    def encoders(self) -> list[PatchEncoder]:
        return [self.roi_encoder, *self.context_encoders.values()]  # type: ignore[list-item]

    def context_encoder(self, scale: str) -> PatchEncoder:
        key = "shared" if "shared" in self.context_encoders else scale
        if key not in self.context_encoders:
            raise ShapeError(f"Model has no context encoder for scale {scale!r}")
        return self.context_encoders[key]  # type: ignore[return-value]

    def reset_parameters(self) -> None:
        for module in self.modules():
            if isinstance(module, nn.Linear):
                nn.init.xavier_uniform_(module.weight)
                if module.bias is not None:
                    nn.init.zeros_(module.bias)
            elif isinstance(module, nn.LayerNorm):
                nn.init.ones_(module.weight)
                nn.init.zeros_(module.bias)
        for encoder in self.encoders():
            nn.init.trunc_normal_(encoder.cls_token, std=0.02)
            nn.init.trunc_normal_(encoder.pos_embedding, std=0.02)

    # -- forward ------------------------------------------------------------

    def encode(self, images: torch.Tensor, which: str = "roi", scale: str | None = None) -> EncoderOutput:
        if which == "roi":
            return self.roi_encoder(images)
        if which == "context":
            if scale is None:
                raise ShapeError("encode(which='context') needs a scale")
            return self.context_encoder(scale)(images)
        raise ShapeError(f"Unknown encoder {which!r}; expected 'roi' or 'context'")

    def fuse(self, roi: torch.Tensor, contexts: Sequence[tuple[str, torch.Tensor]]) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
        expected = tuple(self.config.scales)
        given = tuple(scale for scale, _ in contexts)
        if given != expected:
            raise ShapeError(f"Context scales {list(given)} do not match the model's {list(expected)}")
        g = self.encode(roi, "roi").g
        patches = [(scale, self.encode(images, "context", scale).p) for scale, images in contexts]
        return self.fusion(g, patches)

    def forward(self, roi: torch.Tensor, contexts: Sequence[tuple[str, torch.Tensor]] = ()) -> MATANetOutput:
        z, attention = self.fuse(roi, contexts)
        return MATANetOutput(
            logits=self.classifier(z),
            z=z,
            attention=attention,
            level_logits=self.level_heads(z),
        )


def build_model(config: ModelConfig, seed: int = 0) -> MATANet:
    """Construct with parameters drawn from ``seed``, leaving the global RNG untouched."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = MATANet(config)
    n_params = sum(p.numel() for p in model.parameters())
    logger.info(
        "Built MATANet (scales=%s, roi_only=%s, levels=%s, %d parameters)",
        list(config.scales),
        config.roi_only,
        list(config.ranks),
        n_params,
    )
    return model
