"""
MATANet — Embedding and Attention Exports

Embeddings: one CSV row per ROI with the annotation id, the labelled taxon,
its hierarchical label (node id per rank 1..L) and the fused embedding z.
Projection (t-SNE, UMAP) is left to external tools.

Attention: for each requested annotation and context scale, the final
cross-attention block's weights are averaged over heads, laid out on the
patch grid, bilinearly upsampled to the crop side, min-max normalised and
drawn with the ``jet`` colormap over the context crop at 50% opacity.
Files are ``{annotation_id}_{c3|c5|full}.png``; the raw per-head weights
go to ``attention_weights.npz`` under the same stems.

Usage:
    table = export_embeddings(ckpt, test_ds, "embeddings.csv")
    paths = export_attention(ckpt, test_ds, [17, 42], "attention/")

Dependencies:
    pip install torch numpy matplotlib Pillow
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
import torch
import torch.nn.functional as F
from matplotlib import colormaps
from PIL import Image

from agent_01_taxonomy.algorithms.labels import derive_hierarchical_label
from agent_01_taxonomy.algorithms.tree import TaxonomyTree
from agent_02_data_pipeline.src.dataset import Dataset, DatasetError
from agent_02_data_pipeline.src.roi_context import DUMP_SUFFIX
from agent_03_model.src.checkpoint import Checkpoint, CheckpointError, load_checkpoint
from agent_03_model.src.encoder import ShapeError

from .data import RoiDataset
from .evaluation import Inference, check_label_spaces, run_inference, subset

logger = logging.getLogger(__name__)

OVERLAY_ALPHA = 0.5
HEATMAP_CMAP = "jet"
ATTENTION_ARCHIVE = "attention_weights.npz"


def _as_checkpoint(checkpoint: Checkpoint | str | Path) -> Checkpoint:
    return checkpoint if isinstance(checkpoint, Checkpoint) else load_checkpoint(checkpoint)


# ---------------------------------------------------------------------------
# Embeddings
# ---------------------------------------------------------------------------


@dataclass
class EmbeddingTable:
    annotation_ids: np.ndarray  # N
    taxon_ids: np.ndarray  # N
    rank_ids: np.ndarray  # N x L, hierarchical label per rank
    z: np.ndarray  # N x D_z, float64

    def __len__(self) -> int:
        return len(self.annotation_ids)

    @property
    def header(self) -> list[str]:
        ranks = [f"rank_{r}" for r in range(1, self.rank_ids.shape[1] + 1)]
        dims = [f"z_{d}" for d in range(self.z.shape[1])]
        return ["annotation_id", "taxon_id", *ranks, *dims]


def embedding_table(inference: Inference, tree: TaxonomyTree) -> EmbeddingTable:
    ranks = [derive_hierarchical_label(tree, int(t)).node_ids for t in inference.taxon_ids]
    return EmbeddingTable(
        annotation_ids=inference.annotation_ids.astype(np.int64),
        taxon_ids=inference.taxon_ids.astype(np.int64),
        rank_ids=np.asarray(ranks, dtype=np.int64).reshape(len(ranks), tree.depth),
        z=inference.z.astype(np.float64),
    )


def write_embeddings(table: EmbeddingTable, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(table.header)
        for i in range(len(table)):
            writer.writerow(
                [int(table.annotation_ids[i]), int(table.taxon_ids[i])]
                + [int(n) for n in table.rank_ids[i]]
                + [repr(float(v)) for v in table.z[i]]
            )
    logger.info("Wrote %d embeddings (%d dims) to %s", len(table), table.z.shape[1], path)
    return path


def read_embeddings(path: str | Path) -> EmbeddingTable:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = list(reader)
    n_ranks = sum(1 for name in header if name.startswith("rank_"))
    if header[:2] != ["annotation_id", "taxon_id"] or not n_ranks:
        raise DatasetError(f"{path}: not an embedding table (header {header[:3]}...)")
    ints = np.asarray([[int(v) for v in row[: 2 + n_ranks]] for row in rows], dtype=np.int64).reshape(-1, 2 + n_ranks)
    z = np.asarray([[float(v) for v in row[2 + n_ranks:]] for row in rows], dtype=np.float64)
    return EmbeddingTable(
        annotation_ids=ints[:, 0],
        taxon_ids=ints[:, 1],
        rank_ids=ints[:, 2:],
        z=z.reshape(len(rows), len(header) - 2 - n_ranks),
    )


def export_embeddings(
    checkpoint: Checkpoint | str | Path,
    ds: Dataset,
    path: str | Path | None = None,
    batch_size: int = 64,
    device: torch.device | str = "cpu",
) -> EmbeddingTable:
    ckpt = _as_checkpoint(checkpoint)
    check_label_spaces(ckpt, ds)
    model = ckpt.build_model().to(device)
    table = embedding_table(run_inference(model, ds, batch_size=batch_size, device=device), ds.tree)
    if path is not None:
        write_embeddings(table, path)
    return table


# ---------------------------------------------------------------------------
# Attention heatmaps
# ---------------------------------------------------------------------------


def attention_heatmap(weights: np.ndarray, out_side: int) -> np.ndarray:
    """heads x P attention weights -> out_side x out_side map in [0, 1].

    A constant map (uniform attention) comes out as a flat 0.5.
    """
    mean = np.asarray(weights, dtype=np.float64).reshape(-1, np.shape(weights)[-1]).mean(axis=0)
    grid = math.isqrt(mean.size)
    if grid * grid != mean.size:
        raise ShapeError(f"{mean.size} attention weights do not form a square patch grid")
    up = F.interpolate(
        torch.from_numpy(mean.reshape(1, 1, grid, grid)),
        size=(out_side, out_side),
        mode="bilinear",
        align_corners=False,
    )[0, 0].numpy()
    lo, hi = float(up.min()), float(up.max())
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        return np.full((out_side, out_side), 0.5)
    return (up - lo) / (hi - lo)


def overlay_heatmap(crop: np.ndarray, heat: np.ndarray, alpha: float = OVERLAY_ALPHA) -> np.ndarray:
    """Blend a colormapped heatmap over an H x W x 3 crop in [0, 1]; returns uint8."""
    colored = colormaps[HEATMAP_CMAP](heat)[..., :3]
    blended = (1.0 - alpha) * np.clip(crop, 0.0, 1.0) + alpha * colored
    return np.round(blended * 255.0).astype(np.uint8)


def export_attention(
    checkpoint: Checkpoint | str | Path,
    ds: Dataset,
    ids: Iterable[int],
    out_dir: str | Path,
    batch_size: int = 64,
    device: torch.device | str = "cpu",
) -> list[Path]:
    ckpt = _as_checkpoint(checkpoint)
    config = ckpt.model_config
    if config.roi_only:
        raise CheckpointError("ROI-only checkpoint has no context attention to export")
    check_label_spaces(ckpt, ds)
    chosen = subset(ds, ids)
    model = ckpt.build_model().to(device)
    inference = run_inference(model, chosen, batch_size=batch_size, keep_attention=True, device=device)
    crops = RoiDataset(chosen, config.scales, config.encoder.image_side)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    archive: dict[str, np.ndarray] = {}
    for i, annotation_id in enumerate(int(a) for a in inference.annotation_ids):
        cs = crops.context_set(annotation_id)
        for scale in config.scales:
            weights = inference.attention[scale][i]
            stem = f"{annotation_id}_{DUMP_SUFFIX[scale]}"
            heat = attention_heatmap(weights, config.encoder.image_side)
            path = out_dir / f"{stem}.png"
            Image.fromarray(overlay_heatmap(cs.context(scale), heat)).save(path)
            archive[stem] = weights
            written.append(path)
    archive_path = out_dir / ATTENTION_ARCHIVE
    np.savez(archive_path, **archive)
    written.append(archive_path)
    logger.info("Wrote %d attention overlays for %d ROIs to %s", len(written) - 1, len(inference.annotation_ids), out_dir)
    return written
