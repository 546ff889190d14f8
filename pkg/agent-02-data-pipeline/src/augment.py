#!/usr/bin/env python3
"""
MATANet — Train-time Augmentation

Horizontal flip, vertical flip, right-angle rotation and colour jitter
(brightness, contrast, saturation).  Every random draw comes from a
generator seeded by (seed, sample_id, epoch), so the result depends on the
sample alone, never on batch composition or worker count.

By default one draw is applied identically to all four streams, keeping
ROI and context geometrically aligned; ``consistent=False`` draws each
stream independently.

Dependencies:
    pip install numpy
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .roi_context import ContextSet

_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


@dataclass(frozen=True)
class AugmentConfig:
    p_hflip: float = 0.5
    p_vflip: float = 0.5
    p_rotate: float = 0.5
    p_jitter: float = 0.5
    jitter_low: float = 0.8
    jitter_high: float = 1.25
    consistent: bool = True

    @classmethod
    def disabled(cls) -> "AugmentConfig":
        return cls(p_hflip=0.0, p_vflip=0.0, p_rotate=0.0, p_jitter=0.0)


@dataclass(frozen=True)
class AugmentDraw:
    hflip: bool
    vflip: bool
    quarter_turns: int
    jitter: tuple[float, float, float] | None


# ---------------------------------------------------------------------------
# Primitive transforms (H x W x 3 arrays)
# ---------------------------------------------------------------------------


def flip_horizontal(array: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(array[:, ::-1])


def flip_vertical(array: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(array[::-1])


def rotate_quarter_turns(array: np.ndarray, k: int) -> np.ndarray:
    return np.ascontiguousarray(np.rot90(array, k=k, axes=(0, 1)))


def color_jitter(array: np.ndarray, brightness: float, contrast: float, saturation: float) -> np.ndarray:
    out = array * np.float32(brightness)
    mean_luma = np.float32((out @ _LUMA).mean())
    out = (out - mean_luma) * np.float32(contrast) + mean_luma
    luma = (out @ _LUMA)[..., None]
    out = (out - luma) * np.float32(saturation) + luma
    return np.clip(out, 0.0, 1.0).astype(np.float32)


# ---------------------------------------------------------------------------
# Draws
# ---------------------------------------------------------------------------


def draw_augmentation(rng: np.random.Generator, config: AugmentConfig) -> AugmentDraw:
    # Every value is drawn regardless of the probabilities so the stream of
    # draws does not shift when a probability changes.
    u = rng.random(4)
    turns = int(rng.integers(1, 4))
    log_lo, log_hi = math.log(config.jitter_low), math.log(config.jitter_high)
    factors = np.exp(rng.uniform(log_lo, log_hi, size=3))
    return AugmentDraw(
        hflip=bool(u[0] < config.p_hflip),
        vflip=bool(u[1] < config.p_vflip),
        quarter_turns=turns if u[2] < config.p_rotate else 0,
        jitter=tuple(float(f) for f in factors) if u[3] < config.p_jitter else None,  # type: ignore[arg-type]
    )


def apply_draw(array: np.ndarray, draw: AugmentDraw) -> np.ndarray:
    out = array
    if draw.hflip:
        out = flip_horizontal(out)
    if draw.vflip:
        out = flip_vertical(out)
    if draw.quarter_turns:
        out = rotate_quarter_turns(out, draw.quarter_turns)
    if draw.jitter is not None:
        out = color_jitter(out, *draw.jitter)
    return out


def augment(
    cs: ContextSet,
    seed: int,
    sample_id: int,
    epoch: int,
    config: AugmentConfig = AugmentConfig(),
) -> ContextSet:
    if config.consistent:
        draw = draw_augmentation(np.random.default_rng([seed, sample_id, epoch]), config)
        return cs.map(lambda arr: apply_draw(arr, draw))

    streams = cs.streams()
    augmented = []
    for index, (tag, array) in enumerate(streams):
        draw = draw_augmentation(np.random.default_rng([seed, sample_id, epoch, index]), config)
        augmented.append((tag, apply_draw(array, draw)))
    return ContextSet(roi=augmented[0][1], contexts=tuple(augmented[1:]))
