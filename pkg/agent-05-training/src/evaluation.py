"""
MATANet — Evaluation

Argmax terminal prediction per ROI, scored by exact-match accuracy,
Hierarchical Distance and per-rank accuracy.  Inference runs in eval mode
without gradients over ascending annotation ids, so repeated evaluation of
the same (checkpoint, dataset) pair yields the same report.

Usage:
    result = evaluate("runs/a/checkpoints/final.pt", load_dataset("test.json"), pred_path="pred.csv")
    result.report.write_json("report.json")

Dependencies:
    pip install torch numpy
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import torch

from agent_01_taxonomy.algorithms.hierarchical_distance import (
    PredictionRecord,
    accuracy,
    hierarchical_distance,
    write_predictions,
)
from agent_01_taxonomy.algorithms.labels import derive_hierarchical_label
from agent_01_taxonomy.algorithms.tree import TaxonomyTree
from agent_02_data_pipeline.src.dataset import Dataset, DatasetError
from agent_03_model.src.checkpoint import Checkpoint, CheckpointError, load_checkpoint
from agent_03_model.src.network import MATANet

from .data import RoiDataset, eval_loader, model_inputs

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    hierarchical_distance: float
    per_level_accuracy: tuple[float, ...] = ()
    losses: tuple[dict[str, float], ...] = ()
    n_samples: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy {self.accuracy} outside [0, 1]")
        if self.hierarchical_distance < 0:
            raise ValueError(f"hierarchical distance {self.hierarchical_distance} is negative")

    def to_dict(self) -> dict[str, Any]:
        return {
            "accuracy": self.accuracy,
            "hierarchical_distance": self.hierarchical_distance,
            "per_level_accuracy": list(self.per_level_accuracy),
            "losses": [dict(row) for row in self.losses],
            "n_samples": self.n_samples,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def write_json(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n", encoding="utf-8")
        logger.info("Wrote metrics report %s", path)
        return path


def per_level_accuracy(tree: TaxonomyTree, records: Sequence[PredictionRecord]) -> tuple[float, ...]:
    """Fraction of records whose prediction and truth agree at each rank 1..L."""
    if not records:
        return ()
    hits = np.zeros(tree.depth, dtype=np.int64)
    for rec in records:
        pred = derive_hierarchical_label(tree, rec.predicted_taxon_id).node_ids
        true = derive_hierarchical_label(tree, rec.true_taxon_id).node_ids
        hits += np.asarray(pred) == np.asarray(true)
    return tuple(float(h) / len(records) for h in hits)


def score_predictions(
    tree: TaxonomyTree,
    records: Sequence[PredictionRecord],
    losses: Iterable[dict[str, float]] = (),
) -> MetricsReport:
    return MetricsReport(
        accuracy=accuracy(records),
        hierarchical_distance=hierarchical_distance(tree, records),
        per_level_accuracy=per_level_accuracy(tree, records),
        losses=tuple(losses),
        n_samples=len(records),
    )


# ---------------------------------------------------------------------------
# Inference
# ---------------------------------------------------------------------------


@dataclass
class Inference:
    annotation_ids: np.ndarray  # N
    taxon_ids: np.ndarray  # N
    logits: np.ndarray  # N x K
    z: np.ndarray  # N x D_z
    attention: dict[str, np.ndarray] = field(default_factory=dict)  # scale -> N x heads x P


def subset(ds: Dataset, ids: Iterable[int]) -> Dataset:
    """``ds`` restricted to ``ids``; unknown ids raise DatasetError."""
    by_id = ds.annotation_map()
    wanted = []
    for annotation_id in ids:
        if annotation_id not in by_id:
            raise DatasetError(f"Unknown annotation id {annotation_id}")
        wanted.append(by_id[annotation_id])
    return ds.with_annotations(wanted)


def run_inference(
    model: MATANet,
    ds: Dataset,
    batch_size: int = 64,
    keep_attention: bool = False,
    device: torch.device | str = "cpu",
    num_workers: int = 0,
) -> Inference:
    config = model.config
    items = RoiDataset(ds, config.scales, config.encoder.image_side)
    was_training = model.training
    model.eval()
    ids, taxa, logits, zs = [], [], [], []
    attention: dict[str, list[np.ndarray]] = {scale: [] for scale in config.scales}
    try:
        with torch.no_grad():
            for batch in eval_loader(items, batch_size, num_workers):
                roi, contexts = model_inputs(batch, config.scales, device)
                out = model(roi, contexts)
                ids.append(batch["annotation_id"].numpy())
                taxa.append(batch["taxon_id"].numpy())
                logits.append(out.logits.cpu().numpy())
                zs.append(out.z.cpu().numpy())
                if keep_attention:
                    for scale, weights in out.attention.items():
                        attention[scale].append(weights.cpu().numpy())
    finally:
        model.train(was_training)
    return Inference(
        annotation_ids=np.concatenate(ids),
        taxon_ids=np.concatenate(taxa),
        logits=np.concatenate(logits),
        z=np.concatenate(zs),
        attention={scale: np.concatenate(parts) for scale, parts in attention.items() if parts},
    )


def predictions(inference: Inference, terminal_ids: Sequence[int]) -> list[PredictionRecord]:
    predicted = np.argmax(inference.logits, axis=1)
    return [
        PredictionRecord(int(a), int(terminal_ids[int(k)]), int(t))
        for a, k, t in zip(inference.annotation_ids, predicted, inference.taxon_ids)
    ]


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@dataclass
class EvaluationResult:
    report: MetricsReport
    records: list[PredictionRecord]


def check_label_spaces(checkpoint: Checkpoint, ds: Dataset) -> None:
    """Raise CheckpointError unless the checkpoint's classes live in ``ds``'s taxonomy."""
    if checkpoint.taxonomy and checkpoint.taxonomy != ds.tree.to_records():
        raise CheckpointError("Label-space mismatch: checkpoint taxonomy differs from the dataset taxonomy")
    missing = [t for t in checkpoint.terminal_ids if t not in ds.tree]
    if missing:
        raise CheckpointError(f"Label-space mismatch: checkpoint classes {missing} are not in the dataset taxonomy")
    if len(checkpoint.terminal_ids) != checkpoint.model_config.num_classes:
        raise CheckpointError(
            f"Label-space mismatch: {len(checkpoint.terminal_ids)} terminal ids for "
            f"{checkpoint.model_config.num_classes} classifier outputs"
        )
    for rank, size in checkpoint.model_config.level_sizes.items():
        if len(checkpoint.level_spaces.get(rank, ())) != size:
            raise CheckpointError(f"Label-space mismatch: rank-{rank} head has {size} outputs")


def evaluate_model(
    model: MATANet,
    terminal_ids: Sequence[int],
    ds: Dataset,
    batch_size: int = 64,
    device: torch.device | str = "cpu",
    losses: Iterable[dict[str, float]] = (),
) -> EvaluationResult:
    inference = run_inference(model, ds, batch_size=batch_size, device=device)
    records = predictions(inference, terminal_ids)
    report = score_predictions(ds.tree, records, losses)
    logger.info(
        "Evaluated %d ROIs: accuracy %.4f, HD %.4f",
        report.n_samples,
        report.accuracy,
        report.hierarchical_distance,
        extra={
            "accuracy": report.accuracy,
            "hierarchical_distance": report.hierarchical_distance,
            "per_level_accuracy": list(report.per_level_accuracy),
        },
    )
    return EvaluationResult(report=report, records=records)


def evaluate(
    checkpoint: Checkpoint | str | Path,
    ds: Dataset,
    pred_path: str | Path | None = None,
    batch_size: int = 64,
    device: torch.device | str = "cpu",
) -> EvaluationResult:
    if not isinstance(checkpoint, Checkpoint):
        checkpoint = load_checkpoint(checkpoint)
    check_label_spaces(checkpoint, ds)
    model = checkpoint.build_model().to(device)
    history = checkpoint.train_state.get("history", [])
    result = evaluate_model(model, checkpoint.terminal_ids, ds, batch_size, device, losses=history)
    if pred_path is not None:
        Path(pred_path).parent.mkdir(parents=True, exist_ok=True)
        write_predictions(pred_path, result.records)
        logger.info("Wrote %d predictions to %s", len(result.records), pred_path)
    return result
