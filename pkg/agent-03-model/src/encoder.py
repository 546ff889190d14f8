#!/usr/bin/env python3
"""
MATANet — Patch Transformer Encoder

A small trainable vision transformer: non-overlapping patches are
flattened and embedded, a learned class token and learned positional
embeddings are added, and the sequence passes through pre-norm
self-attention blocks followed by a final LayerNorm.

The class-token output is the whole-image embedding g; the remaining
outputs are the patch embeddings p used as keys and values by the fusion
module.

Dependencies:
    pip install torch einops
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
from einops import rearrange, repeat
from einops.layers.torch import Rearrange

from .config import EncoderConfig


class ShapeError(ValueError):
    """Tensor shape does not match the model configuration."""


@dataclass
class EncoderOutput:
    g: torch.Tensor  # B x D
    p: torch.Tensor  # B x N x D


class FeedForward(nn.Module):
    def __init__(self, dim: int, hidden_dim: int):
        super().__init__()
        self.norm = nn.LayerNorm(dim)
        self.fc1 = nn.Linear(dim, hidden_dim)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(hidden_dim, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(self.act(self.fc1(self.norm(x))))


class SelfAttention(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.scale = (dim // heads) ** -0.5
        self.norm = nn.LayerNorm(dim)
        self.to_qkv = nn.Linear(dim, dim * 3)
        self.to_out = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        q, k, v = self.to_qkv(self.norm(x)).chunk(3, dim=-1)
        q, k, v = (rearrange(t, "b n (h d) -> b h n d", h=self.heads) for t in (q, k, v))
        attn = torch.softmax(torch.matmul(q, k.transpose(-1, -2)) * self.scale, dim=-1)
        out = rearrange(torch.matmul(attn, v), "b h n d -> b n (h d)")
        return self.to_out(out)


class EncoderBlock(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.attn = SelfAttention(dim, heads)
        self.ff = FeedForward(dim, 4 * dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(x)
        return x + self.ff(x)


class PatchEncoder(nn.Module):
    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        dim = config.embed_dim
        patch_dim = 3 * config.patch_size ** 2

        self.to_patches = Rearrange(
            "b c (h p1) (w p2) -> b (h w) (p1 p2 c)", p1=config.patch_size, p2=config.patch_size
        )
        self.patch_embed = nn.Linear(patch_dim, dim)
        self.cls_token = nn.Parameter(torch.zeros(1, 1, dim))
        self.pos_embedding = nn.Parameter(torch.zeros(1, config.n_patches + 1, dim))
        self.blocks = nn.ModuleList([EncoderBlock(dim, config.heads) for _ in range(config.depth)])
        self.norm = nn.LayerNorm(dim)

    def forward(self, images: torch.Tensor) -> EncoderOutput:
        side = self.config.image_side
        if images.ndim != 4 or tuple(images.shape[1:]) != (3, side, side):
            raise ShapeError(f"Expected B x 3 x {side} x {side} images, got {tuple(images.shape)}")
        x = self.patch_embed(self.to_patches(images))
        cls = repeat(self.cls_token, "1 1 d -> b 1 d", b=x.shape[0])
        x = torch.cat((cls, x), dim=1) + self.pos_embedding
        for block in self.blocks:
            x = block(x)
        x = self.norm(x)
        return EncoderOutput(g=x[:, 0], p=x[:, 1:])
