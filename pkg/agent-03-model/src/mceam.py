#!/usr/bin/env python3
"""
MATANet — Multi-Context Environmental Attention Module

The ROI embedding g queries each context stream's patch embeddings
through a stack of cross-attention blocks.  Each context scale owns its
stack.  The stacks' outputs are concatenated with g and projected to the
fused embedding z:

    z = Proj(concat(g, a_3, a_5, a_full))

Block (pre-norm), with x the single query token and p the patch matrix:

    q = W_q LN_q(x),  k = W_k LN_kv(p),  v = W_v LN_kv(p)
    A_h = softmax(q_h k_h^T / sqrt(D / heads))      per head h
    x  <- x + W_o concat_h(A_h v_h)
    x  <- x + W_2 GELU(W_1 LN_ff(x))                hidden width 4D

The attention weights A of the last block are returned for export.

Dependencies:
    pip install torch einops
"""

from __future__ import annotations

from typing import Sequence

import torch
import torch.nn as nn
from einops import rearrange

from .config import ModelConfigError
from .encoder import FeedForward, ShapeError


# ---------------------------------------------------------------------------
# Cross-attention
# ---------------------------------------------------------------------------


class CrossAttentionBlock(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        if dim % heads:
            raise ModelConfigError(f"dim {dim} is not divisible by heads {heads}")
        self.heads = heads
        self.scale = (dim // heads) ** -0.5
        self.norm_q = nn.LayerNorm(dim)
        self.norm_kv = nn.LayerNorm(dim)
        self.to_q = nn.Linear(dim, dim)
        self.to_k = nn.Linear(dim, dim)
        self.to_v = nn.Linear(dim, dim)
        self.to_out = nn.Linear(dim, dim)
        self.ff = FeedForward(dim, 4 * dim)

    def forward(self, x: torch.Tensor, p: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """x: B x 1 x D query token, p: B x N x D.  Returns (x', weights B x heads x N)."""
        kv = self.norm_kv(p)
        q = rearrange(self.to_q(self.norm_q(x)), "b n (h d) -> b h n d", h=self.heads)
        k = rearrange(self.to_k(kv), "b n (h d) -> b h n d", h=self.heads)
        v = rearrange(self.to_v(kv), "b n (h d) -> b h n d", h=self.heads)
        weights = torch.softmax(torch.matmul(q, k.transpose(-1, -2)) * self.scale, dim=-1)
        out = rearrange(torch.matmul(weights, v), "b h n d -> b n (h d)")
        x = x + self.to_out(out)
        x = x + self.ff(x)
        return x, weights[:, :, 0, :]


class CrossAttentionStack(nn.Module):
    def __init__(self, dim: int, heads: int = 4, depth: int = 4):
        super().__init__()
        self.dim = dim
        self.blocks = nn.ModuleList([CrossAttentionBlock(dim, heads) for _ in range(depth)])

    def forward(self, g: torch.Tensor, p: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """g: B x D, p: B x N x D -> (a: B x D, final-block weights B x heads x N)."""
        if g.ndim != 2 or p.ndim != 3 or g.shape[-1] != self.dim or p.shape[-1] != self.dim or g.shape[0] != p.shape[0]:
            raise ShapeError(
                f"Cross-attention expects g (B x {self.dim}) and p (B x N x {self.dim}), "
                f"got {tuple(g.shape)} and {tuple(p.shape)}"
            )
        x = g.unsqueeze(1)
        weights = None
        for block in self.blocks:
            x, weights = block(x, p)
        return x.squeeze(1), weights  # type: ignore[return-value]


# ---------------------------------------------------------------------------
# Fusion
# ---------------------------------------------------------------------------


def projection(in_dim: int, fused_dim: int) -> nn.Sequential:
    return nn.Sequential(nn.Linear(in_dim, fused_dim), nn.GELU(), nn.Linear(fused_dim, fused_dim))


class MCEAM(nn.Module):
    def __init__(self, dim: int, scales: Sequence[str], fused_dim: int | None = None, heads: int = 4, depth: int = 4):
        super().__init__()
        if not scales:
            raise ModelConfigError("MCEAM needs at least one context scale; use RoiOnlyFusion for the ROI-only baseline")
        self.scales = tuple(scales)
        self.dim = dim
        self.fused_dim = fused_dim or dim
        self.stacks = nn.ModuleDict({scale: CrossAttentionStack(dim, heads, depth) for scale in self.scales})
        self.proj = projection((len(self.scales) + 1) * dim, self.fused_dim)

    @property
    def concat_dim(self) -> int:
        return (len(self.scales) + 1) * self.dim

    def forward(
        self, g: torch.Tensor, contexts: Sequence[tuple[str, torch.Tensor]]
    ) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
        if not contexts:
            raise ModelConfigError("mceam_fuse called with an empty context list")
        given = tuple(scale for scale, _ in contexts)
        if given != self.scales:
            raise ShapeError(f"Context scales {list(given)} do not match the model's {list(self.scales)}")
        parts = [g]
        attention: dict[str, torch.Tensor] = {}
        for scale, p in contexts:
            a, weights = self.stacks[scale](g, p)
            parts.append(a)
            attention[scale] = weights
        return self.proj(torch.cat(parts, dim=-1)), attention


class RoiOnlyFusion(nn.Module):
    """Baseline fusion path: z = Proj(g)."""

    scales: tuple[str, ...] = ()

    def __init__(self, dim: int, fused_dim: int | None = None):
        super().__init__()
        self.dim = dim
        self.fused_dim = fused_dim or dim
        self.proj = projection(dim, self.fused_dim)

    def forward(
        self, g: torch.Tensor, contexts: Sequence[tuple[str, torch.Tensor]] = ()
    ) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
        if contexts:
            raise ShapeError("ROI-only model received context streams")
        return self.proj(g), {}
