#!/usr/bin/env python3
"""
MATANet — ROI and Context Crops

Geometry of the four input streams: a square ROI crop (side = max(w, h),
centred on the bounding box) plus square context crops at 3x and 5x that
side and a full-image crop (side = max(W, H)), all sharing the ROI centre
and all resized to the same output side.

Resampling is bilinear with half-pixel-centred coordinates; anything a
window covers outside the image is filled by edge replication.  Windows
are never clamped, so the object stays centred in every stream.

Dependencies:
    pip install numpy pillow torch
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

logger = logging.getLogger(__name__)

SCALE_TOKENS: tuple[str, ...] = ("3", "5", "full")
CONTEXT_MULTIPLIERS = {"3": 3.0, "5": 5.0}
DEFAULT_CROP_SIDE = 256

DUMP_SUFFIX = {"roi": "roi", "3": "c3", "5": "c5", "full": "full"}


class CropError(ValueError):
    """Invalid crop window or scale."""


# ---------------------------------------------------------------------------
# Windows
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CropWindow:
    cx: float
    cy: float
    side: float

    def __post_init__(self) -> None:
        if not self.side > 0:
            raise CropError(f"Crop window side must be > 0, got {self.side}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.cx, self.cy)

    def bounds(self) -> tuple[float, float, float, float]:
        """(x0, y0, x1, y1) in continuous pixel coordinates."""
        half = self.side / 2.0
        return (self.cx - half, self.cy - half, self.cx + half, self.cy + half)

    def contains(self, other: "CropWindow") -> bool:
        x0, y0, x1, y1 = self.bounds()
        a0, b0, a1, b1 = other.bounds()
        return x0 <= a0 and y0 <= b0 and a1 <= x1 and b1 <= y1


def normalize_scale(token: Any) -> str:
    """Map 3, 5, "3", "5", "full" to the canonical string token."""
    text = str(token).strip().lower()
    if text in SCALE_TOKENS:
        return text
    raise CropError(f"Unsupported context scale {token!r}; expected one of {list(SCALE_TOKENS)}")


def canonical_scales(scales: Iterable[Any]) -> tuple[str, ...]:
    """Deduplicated scale tokens in the fixed stream order (3, 5, full)."""
    requested = {normalize_scale(s) for s in scales}
    return tuple(s for s in SCALE_TOKENS if s in requested)


def square_roi_window(bbox: Sequence[float]) -> CropWindow:
    x, y, w, h = bbox
    if w <= 0 or h <= 0:
        raise CropError(f"Bounding box extent must be positive, got w={w}, h={h}")
    return CropWindow(cx=x + w / 2.0, cy=y + h / 2.0, side=float(max(w, h)))


def context_window(roi_window: CropWindow, scale: Any) -> CropWindow:
    token = str(scale).strip().lower()
    if token not in CONTEXT_MULTIPLIERS:
        raise CropError(
            f"Unsupported context scale {scale!r} for context_window; "
            f"expected one of {sorted(CONTEXT_MULTIPLIERS)} (use full_window for 'full')"
        )
    return CropWindow(cx=roi_window.cx, cy=roi_window.cy, side=roi_window.side * CONTEXT_MULTIPLIERS[token])


def full_window(image: Any, roi_window: CropWindow) -> CropWindow:
    """Largest square centred on the object: side = max(width, height).

    ``image`` is anything with ``width``/``height`` (an ImageRecord) or a
    ``(width, height)`` pair.
    """
    if hasattr(image, "width") and hasattr(image, "height"):
        width, height = image.width, image.height
    else:
        width, height = image
    return CropWindow(cx=roi_window.cx, cy=roi_window.cy, side=float(max(width, height)))


# ---------------------------------------------------------------------------
# Resampling
# ---------------------------------------------------------------------------


def extract(image: np.ndarray, window: CropWindow, out_side: int = DEFAULT_CROP_SIDE) -> np.ndarray:
    """
    Sample ``window`` out of an H x W x 3 image in [0, 1] and resize it to
    out_side x out_side x 3 (float32, values in [0, 1]).

    Output pixel j samples source coordinate
        x = x0 + (j + 0.5) * side / out_side - 0.5
    (pixel centres at integer coordinates), bilinearly, with coordinates
    outside the image clamped to the border pixels.
    """
    if image.ndim != 3 or image.shape[2] != 3:
        raise CropError(f"Expected an H x W x 3 image, got shape {image.shape}")
    height, width = image.shape[:2]
    x0, y0, x1, y1 = window.bounds()
    if x1 <= 0 or y1 <= 0 or x0 >= width or y0 >= height:
        raise CropError(f"Crop window {window} lies entirely outside the {width}x{height} image")

    steps = (np.arange(out_side, dtype=np.float64) + 0.5) * (window.side / out_side)
    xs = x0 + steps - 0.5
    ys = y0 + steps - 0.5
    # grid_sample (align_corners=False) maps normalised u to pixel (u + 1) * W / 2 - 0.5
    gx = (2.0 * xs + 1.0) / width - 1.0
    gy = (2.0 * ys + 1.0) / height - 1.0
    grid_y, grid_x = np.meshgrid(gy, gx, indexing="ij")
    grid = torch.from_numpy(np.stack([grid_x, grid_y], axis=-1)[None])

    src = torch.from_numpy(np.ascontiguousarray(image, dtype=np.float64)).permute(2, 0, 1)[None]
    out = F.grid_sample(src, grid, mode="bilinear", padding_mode="border", align_corners=False)
    crop = out[0].permute(1, 2, 0).numpy()
    return np.clip(crop, 0.0, 1.0).astype(np.float32)


# ---------------------------------------------------------------------------
# Context sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContextSet:
    """The ROI crop plus context crops in fixed (3, 5, full) order."""

    roi: np.ndarray
    contexts: tuple[tuple[str, np.ndarray], ...]

    @property
    def scales(self) -> tuple[str, ...]:
        return tuple(tag for tag, _ in self.contexts)

    def context(self, scale: str) -> np.ndarray:
        for tag, array in self.contexts:
            if tag == scale:
                return array
        raise CropError(f"Context set has no {scale!r} stream (has {list(self.scales)})")

    def streams(self) -> list[tuple[str, np.ndarray]]:
        return [("roi", self.roi), *self.contexts]

    def map(self, fn) -> "ContextSet":
        return ContextSet(roi=fn(self.roi), contexts=tuple((tag, fn(arr)) for tag, arr in self.contexts))


def context_windows(
    image_size: tuple[int, int],
    bbox: Sequence[float],
    scales: Iterable[Any] = SCALE_TOKENS,
) -> tuple[CropWindow, list[tuple[str, CropWindow]]]:
    roi_win = square_roi_window(bbox)
    windows = []
    for tag in canonical_scales(scales):
        if tag == "full":
            windows.append((tag, full_window(image_size, roi_win)))
        else:
            windows.append((tag, context_window(roi_win, tag)))
    return roi_win, windows


def build_context_set(
    image: np.ndarray,
    bbox: Sequence[float],
    scales: Iterable[Any] = SCALE_TOKENS,
    out_side: int = DEFAULT_CROP_SIDE,
) -> ContextSet:
    height, width = image.shape[:2]
    roi_win, windows = context_windows((width, height), bbox, scales)
    return ContextSet(
        roi=extract(image, roi_win, out_side),
        contexts=tuple((tag, extract(image, win, out_side)) for tag, win in windows),
    )


def dump_context_set(cs: ContextSet, out_dir: str | Path, annotation_id: int) -> list[Path]:
    """Write each stream as ``{annotation_id}_{roi|c3|c5|full}.png``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for tag, array in cs.streams():
        path = out_dir / f"{annotation_id}_{DUMP_SUFFIX[tag]}.png"
        Image.fromarray(np.round(np.clip(array, 0.0, 1.0) * 255.0).astype(np.uint8)).save(path)
        written.append(path)
    logger.debug("Dumped %d crops for annotation %d to %s", len(written), annotation_id, out_dir)
    return written
