"""Shared builders and oracles for the test suite."""

from __future__ import annotations

import json
from collections import deque
from pathlib import Path

import numpy as np
from PIL import Image


# ---------------------------------------------------------------------------
# Trees
# ---------------------------------------------------------------------------


def random_tree_records(rng: np.random.Generator, n_nodes: int) -> list[tuple[int, str, int, int | None]]:
    """Random rooted tree; ids are unique but not contiguous or ordered."""
    ids = [int(i) for i in rng.choice(10 * n_nodes + 10, size=n_nodes, replace=False)]
    records = [(ids[0], f"t{ids[0]}", 0, None)]
    ranks = {ids[0]: 0}
    for nid in ids[1:]:
        parent = ids[int(rng.integers(0, len(records)))]
        ranks[nid] = ranks[parent] + 1
        records.append((nid, f"t{nid}", ranks[nid], parent))
    return records


def balanced_tree_records(branching: tuple[int, ...]) -> list[tuple[int, str, int, int | None]]:
    """Full tree with ``branching[k]`` children per rank-k node, ids in BFS order."""
    records = [(0, "root", 0, None)]
    frontier = [0]
    next_id = 1
    for rank, fan_out in enumerate(branching, start=1):
        new_frontier = []
        for parent in frontier:
            for _ in range(fan_out):
                records.append((next_id, f"r{rank}-{next_id}", rank, parent))
                new_frontier.append(next_id)
                next_id += 1
        frontier = new_frontier
    return records


def bfs_distance(records, a: int, b: int) -> int:
    """Path length by breadth-first search over the undirected tree."""
    adjacency: dict[int, list[int]] = {r[0]: [] for r in records}
    for node_id, _, _, parent in records:
        if parent is not None:
            adjacency[node_id].append(parent)
            adjacency[parent].append(node_id)
    seen = {a: 0}
    queue = deque([a])
    while queue:
        current = queue.popleft()
        if current == b:
            return seen[current]
        for nxt in adjacency[current]:
            if nxt not in seen:
                seen[nxt] = seen[current] + 1
                queue.append(nxt)
    raise AssertionError(f"{b} unreachable from {a}")


# ---------------------------------------------------------------------------
# Datasets on disk
# ---------------------------------------------------------------------------


SMALL_TAXONOMY = [
    {"id": 0, "name": "root", "rank": 0, "parent_id": None},
    {"id": 1, "name": "class-a", "rank": 1, "parent_id": 0},
    {"id": 2, "name": "class-b", "rank": 1, "parent_id": 0},
    {"id": 3, "name": "species-a1", "rank": 2, "parent_id": 1},
    {"id": 4, "name": "species-a2", "rank": 2, "parent_id": 1},
    {"id": 5, "name": "species-b1", "rank": 2, "parent_id": 2},
    {"id": 6, "name": "species-b2", "rank": 2, "parent_id": 2},
]


def write_png(path: Path, array: np.ndarray) -> None:
    Image.fromarray(np.clip(array * 255.0 + 0.5, 0, 255).astype(np.uint8)).save(path)


def write_annotation_file(
    root: Path,
    annotations: list[dict],
    image_sizes: dict[int, tuple[int, int]],
    taxonomy: list[dict] | None = None,
    seed: int = 0,
    name: str = "annotations.json",
) -> Path:
    """Write random-noise PNGs plus an annotation file; returns its path."""
    rng = np.random.default_rng(seed)
    image_dir = root / "images"
    image_dir.mkdir(parents=True, exist_ok=True)
    images = []
    for image_id, (width, height) in sorted(image_sizes.items()):
        file_name = f"img_{image_id}.png"
        write_png(image_dir / file_name, rng.random((height, width, 3)))
        images.append({"id": image_id, "file": f"images/{file_name}", "width": width, "height": height})
    payload = {
        "images": images,
        "annotations": annotations,
        "taxonomy": taxonomy if taxonomy is not None else SMALL_TAXONOMY,
    }
    path = root / name
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def tiny_synthetic_spec(**overrides):
    """32 px scenes over the 3 x 2 x 2 taxonomy; cheap enough for unit tests."""
    from agent_04_synthetic_data.src.spec import SynthSpec

    params = {
        "image_side": 32,
        "roi_side_min": 6,
        "roi_side_max": 10,
        "train_samples": 32,
        "test_samples": 24,
        "alpha": 0.5,
    }
    params.update(overrides)
    return SynthSpec(**params)


def tiny_train_config(**overrides):
    """16 px crops, 4 px patches, one block everywhere."""
    from agent_05_training.src.config import TrainConfig

    params = {
        "epochs": 1,
        "batch_size": 32,
        "lr": 1e-3,
        "fusion_blocks": 1,
        "fusion_heads": 2,
        "encoder": {"image_side": 16, "patch_size": 4, "embed_dim": 16, "depth": 1, "heads": 2},
        "eval_every": 0,
        "eval_batch_size": 16,
    }
    params.update(overrides)
    return TrainConfig(**params)
