#!/usr/bin/env python3
"""
MATANet — Synthetic Taxonomy Scenes

Procedurally drawn scenes in which the ROI alone is ambiguous between
sibling terminals and the surrounding context resolves it.

Every scene holds one ROI glyph on a band-limited noise background:

    background   colour and grain set by the rank-1 ancestor
    ROI glyph    neutral shape set by the terminal's parent, plus a dark
                 mark whose position encodes the terminal among its
                 siblings; the mark is omitted with probability alpha
    companions   3-6 glyphs of the parent's shape, coloured by the
                 terminal's sibling index, placed 1.25-2.4 ROI sides away
                 from the ROI centre (outside the ROI crop)

With alpha = 1 sibling terminals render identically inside the ROI crop;
only the companions (seen by the context crops) separate them.

Output layout:

    out_dir/images/{split}_{index:05d}.png
    out_dir/train.json, out_dir/test.json    annotation files
    out_dir/taxonomy.json
    out_dir/manifest.json                    counts, alpha, seed, checksum

Each sample is a pure function of (seed, split, index).

Usage:
    python matanet.py synth --spec agent-04-synthetic-data/config/synth_defaults.yaml --out data/synth

Dependencies:
    pip install numpy scipy pillow
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from PIL import Image, ImageDraw
from scipy.ndimage import gaussian_filter

from agent_01_taxonomy.algorithms.tree import TaxonNode, TaxonomyTree, build_tree, write_taxonomy
from agent_02_data_pipeline.src.dataset import Dataset, load_dataset, save_dataset

from .spec import SynthSpec
from .truncation import truncate_labels

logger = logging.getLogger(__name__)

SPLITS = {"train": 0, "test": 1}
SUPERSAMPLE = 4

BACKGROUND_COLORS = (
    (0.16, 0.30, 0.52),
    (0.46, 0.38, 0.22),
    (0.22, 0.44, 0.28),
    (0.40, 0.26, 0.44),
    (0.30, 0.30, 0.30),
)
BACKGROUND_GRAIN = (1.5, 4.0, 8.0, 2.5, 6.0)
NOISE_AMPLITUDE = 0.06

SHAPES = ("circle", "square", "triangle", "diamond", "hexagon", "cross", "ring", "star")
SIBLING_COLORS = (
    (0.95, 0.25, 0.20),
    (0.20, 0.85, 0.95),
    (0.95, 0.85, 0.20),
    (0.85, 0.30, 0.90),
    (0.30, 0.95, 0.35),
)
GLYPH_COLOR = (0.86, 0.86, 0.86)
MARK_COLOR = (0.06, 0.06, 0.06)

GLYPH_RADIUS = 0.45
MARK_RADIUS = 0.14
MARK_OFFSET = 0.22
COMPANION_RADIUS = 0.28
COMPANION_DISTANCE = (1.25, 2.4)


# ---------------------------------------------------------------------------
# Taxonomy
# ---------------------------------------------------------------------------


def build_synthetic_taxonomy(branching: tuple[int, ...]) -> TaxonomyTree:
    """Balanced tree, ids in breadth-first order from the root (id 0)."""
    nodes = [TaxonNode(id=0, name="root", rank=0, parent_id=None)]
    frontier: list[tuple[int, str]] = [(0, "")]
    next_id = 1
    for rank, fan_out in enumerate(branching, start=1):
        new_frontier = []
        for parent, path in frontier:
            for child in range(fan_out):
                child_path = f"{path}.{child}" if path else str(child)
                nodes.append(TaxonNode(id=next_id, name=f"r{rank}-{child_path}", rank=rank, parent_id=parent))
                new_frontier.append((next_id, child_path))
                next_id += 1
        frontier = new_frontier
    return build_tree(nodes)


@dataclass(frozen=True)
class TerminalStyle:
    background: tuple[float, float, float]
    grain: float
    shape: str
    sibling_index: int
    sibling_count: int
    companion_color: tuple[float, float, float]


def terminal_style(tree: TaxonomyTree, terminal: int) -> TerminalStyle:
    top = tree.ancestor_at(terminal, 1)
    top_index = tree.level_index[1].index(top)
    parent = tree.parent(terminal)
    parent_rank = tree.rank(parent)  # type: ignore[arg-type]
    shape_index = tree.level_index[parent_rank].index(parent) if parent_rank >= 1 else 0
    siblings = tree.children(parent)  # type: ignore[arg-type]
    k = siblings.index(terminal)
    return TerminalStyle(
        background=BACKGROUND_COLORS[top_index % len(BACKGROUND_COLORS)],
        grain=BACKGROUND_GRAIN[top_index % len(BACKGROUND_GRAIN)],
        shape=SHAPES[shape_index % len(SHAPES)],
        sibling_index=k,
        sibling_count=len(siblings),
        companion_color=SIBLING_COLORS[k % len(SIBLING_COLORS)],
    )


# ---------------------------------------------------------------------------
# Drawing
# ---------------------------------------------------------------------------


def _rgb8(color: tuple[float, float, float]) -> tuple[int, int, int]:
    return tuple(int(round(c * 255)) for c in color)  # type: ignore[return-value]


def _polygon(cx: float, cy: float, r: float, n: int, phase: float) -> list[tuple[float, float]]:
    return [(cx + r * math.cos(phase + 2 * math.pi * i / n), cy + r * math.sin(phase + 2 * math.pi * i / n)) for i in range(n)]


def draw_shape(draw: ImageDraw.ImageDraw, shape: str, cx: float, cy: float, r: float, color: tuple[float, float, float]) -> None:
    fill = _rgb8(color)
    if shape == "circle":
        draw.ellipse([cx - r, cy - r, cx + r, cy + r], fill=fill)
    elif shape == "ring":
        draw.ellipse([cx - r, cy - r, cx + r, cy + r], outline=fill, width=max(1, int(round(0.4 * r))))
    elif shape == "square":
        side = r * 0.85
        draw.rectangle([cx - side, cy - side, cx + side, cy + side], fill=fill)
    elif shape == "triangle":
        draw.polygon(_polygon(cx, cy, r, 3, -math.pi / 2), fill=fill)
    elif shape == "diamond":
        draw.polygon(_polygon(cx, cy, r, 4, 0.0), fill=fill)
    elif shape == "hexagon":
        draw.polygon(_polygon(cx, cy, r, 6, 0.0), fill=fill)
    elif shape == "cross":
        arm = r * 0.35
        draw.rectangle([cx - r, cy - arm, cx + r, cy + arm], fill=fill)
        draw.rectangle([cx - arm, cy - r, cx + arm, cy + r], fill=fill)
    elif shape == "star":
        points = []
        for i in range(10):
            radius = r if i % 2 == 0 else r * 0.45
            angle = -math.pi / 2 + math.pi * i / 5
            points.append((cx + radius * math.cos(angle), cy + radius * math.sin(angle)))
        draw.polygon(points, fill=fill)
    else:
        raise ValueError(f"Unknown shape {shape!r}")


def background(rng: np.random.Generator, side: int, style: TerminalStyle) -> np.ndarray:
    noise = gaussian_filter(rng.standard_normal((side, side, 3)), sigma=(style.grain, style.grain, 0))
    noise /= max(float(noise.std()), 1e-12)
    return np.clip(np.asarray(style.background) + NOISE_AMPLITUDE * noise, 0.0, 1.0)


@dataclass(frozen=True)
class Scene:
    image: np.ndarray  # uint8 H x W x 3
    bbox: tuple[int, int, int, int]
    mark_omitted: bool


def render_scene(spec: SynthSpec, tree: TaxonomyTree, terminal: int, rng: np.random.Generator) -> Scene:
    """Draw one scene; the number and order of random draws never varies."""
    style = terminal_style(tree, terminal)
    side = spec.image_side
    s = int(rng.integers(spec.roi_side_min, spec.roi_side_max + 1))
    x0 = int(rng.integers(0, side - s + 1))
    y0 = int(rng.integers(0, side - s + 1))
    omit_mark = bool(rng.random() < spec.alpha)
    n_companions = int(rng.integers(spec.companions_min, spec.companions_max + 1))
    distances = rng.uniform(*COMPANION_DISTANCE, size=spec.companions_max)
    angles = rng.uniform(0.0, 2 * math.pi, size=spec.companions_max)
    bg = background(rng, side, style)

    canvas = Image.fromarray(np.round(bg * 255).astype(np.uint8)).resize(
        (side * SUPERSAMPLE, side * SUPERSAMPLE), Image.Resampling.NEAREST
    )
    draw = ImageDraw.Draw(canvas)
    scale = SUPERSAMPLE
    cx, cy = x0 + s / 2.0, y0 + s / 2.0

    for dist, angle in zip(distances[:n_companions], angles[:n_companions]):
        px = cx + dist * s * math.cos(angle)
        py = cy + dist * s * math.sin(angle)
        draw_shape(draw, style.shape, px * scale, py * scale, COMPANION_RADIUS * s * scale, style.companion_color)

    draw_shape(draw, style.shape, cx * scale, cy * scale, GLYPH_RADIUS * s * scale, GLYPH_COLOR)
    if not omit_mark:
        angle = math.pi / 4 + 2 * math.pi * style.sibling_index / style.sibling_count
        mx = cx + MARK_OFFSET * s * math.cos(angle)
        my = cy + MARK_OFFSET * s * math.sin(angle)
        draw_shape(draw, "circle", mx * scale, my * scale, MARK_RADIUS * s * scale, MARK_COLOR)

    image = canvas.resize((side, side), Image.Resampling.BOX)
    return Scene(image=np.asarray(image, dtype=np.uint8), bbox=(x0, y0, s, s), mark_omitted=omit_mark)


# ---------------------------------------------------------------------------
# Dataset generation
# ---------------------------------------------------------------------------


def split_terminals(tree: TaxonomyTree, n_samples: int) -> list[int]:
    """Terminal of sample i is leaves[i % T]: per-class counts differ by at most 1."""
    leaves = tree.leaves()
    return [leaves[i % len(leaves)] for i in range(n_samples)]


def _write_split(spec: SynthSpec, tree: TaxonomyTree, out_dir: Path, split: str, n_samples: int, id_offset: int) -> tuple[Path, list[int]]:
    image_dir = out_dir / "images"
    image_dir.mkdir(parents=True, exist_ok=True)
    images, annotations, omitted = [], [], []
    for index, terminal in enumerate(split_terminals(tree, n_samples)):
        rng = np.random.default_rng([spec.seed, SPLITS[split], index])
        scene = render_scene(spec, tree, terminal, rng)
        sample_id = id_offset + index
        file_name = f"images/{split}_{index:05d}.png"
        Image.fromarray(scene.image).save(out_dir / file_name)
        images.append({"id": sample_id, "file": file_name, "width": spec.image_side, "height": spec.image_side})
        annotations.append({"id": sample_id, "image_id": sample_id, "bbox": list(scene.bbox), "taxon_id": terminal})
        if scene.mark_omitted:
            omitted.append(sample_id)
    path = out_dir / f"{split}.json"
    payload = {"split": split, "images": images, "annotations": annotations, "taxonomy": tree.to_records()}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
    return path, omitted


def file_list_checksum(out_dir: Path, relative_paths: list[str]) -> str:
    digest = hashlib.sha256()
    for rel in sorted(relative_paths):
        digest.update(rel.encode("utf-8"))
        digest.update(b"\0")
        digest.update(hashlib.sha256((out_dir / rel).read_bytes()).hexdigest().encode("ascii"))
        digest.update(b"\n")
    return digest.hexdigest()


def _split_counts(ds: Dataset) -> dict[str, Any]:
    per_class = Counter(ds.terminals())
    return {**ds.counts(), "per_class": {str(t): per_class[t] for t in sorted(per_class)}}


@dataclass(frozen=True)
class GenerationResult:
    out_dir: Path
    train_file: Path
    test_file: Path
    taxonomy_file: Path
    manifest_file: Path
    manifest: dict[str, Any]


def generate(spec: SynthSpec, out_dir: str | Path) -> GenerationResult:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tree = build_synthetic_taxonomy(tuple(spec.branching))
    logger.info(
        "Generating synthetic scenes: %d terminals, alpha=%.2f, %d train / %d test, seed=%d",
        spec.n_terminals,
        spec.alpha,
        spec.train_samples,
        spec.test_samples,
        spec.seed,
    )

    train_file, train_omitted = _write_split(spec, tree, out_dir, "train", spec.train_samples, 0)
    test_file, test_omitted = _write_split(spec, tree, out_dir, "test", spec.test_samples, spec.train_samples)
    taxonomy_file = out_dir / "taxonomy.json"
    write_taxonomy(tree, taxonomy_file)

    # Reload through the public loader so the written files are validated.
    train = load_dataset(train_file)
    test = load_dataset(test_file)
    truncated: list[int] = []
    if spec.truncate_fraction > 0:
        truncated_ds = truncate_labels(train, spec.truncate_fraction, spec.seed)
        originals = train.annotation_map()
        truncated = [a.id for a in truncated_ds.annotations if a.taxon_id != originals[a.id].taxon_id]
        save_dataset(truncated_ds, train_file)
        train = truncated_ds

    files = [f"images/{p.name}" for p in (out_dir / "images").glob("*.png")]
    files += ["train.json", "test.json", "taxonomy.json"]
    manifest = {
        "seed": spec.seed,
        "alpha": spec.alpha,
        "spec": spec.model_dump(mode="json"),
        "counts": {"train": _split_counts(train), "test": _split_counts(test)},
        "mark_omitted": {"train": train_omitted, "test": test_omitted},
        "truncated": truncated,
        "file_count": len(files),
        "checksum": file_list_checksum(out_dir, files),
    }
    manifest_file = out_dir / "manifest.json"
    with open(manifest_file, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
    logger.info("Wrote synthetic dataset to %s (%d files, checksum %s)", out_dir, len(files), manifest["checksum"][:12])
    return GenerationResult(
        out_dir=out_dir,
        train_file=train_file,
        test_file=test_file,
        taxonomy_file=taxonomy_file,
        manifest_file=manifest_file,
        manifest=manifest,
    )
