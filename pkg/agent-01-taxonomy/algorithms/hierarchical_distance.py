#!/usr/bin/env python3
"""
MATANet — Hierarchical Distance

Mean unit-edge path length between predicted and true taxa:

    HD = (1/N) * sum_i d(y_i, y_hat_i)

Predictions and truths may sit at different ranks; both are nodes of the
same tree and the path length is used unchanged.

Prediction files are CSV with header:
    annotation_id,predicted_taxon_id,true_taxon_id
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .tree import TaxonomyError, TaxonomyTree, node_distance

PREDICTION_FIELDS = ("annotation_id", "predicted_taxon_id", "true_taxon_id")


@dataclass(frozen=True)
class PredictionRecord:
    annotation_id: int
    predicted_taxon_id: int
    true_taxon_id: int

    @property
    def correct(self) -> bool:
        return self.predicted_taxon_id == self.true_taxon_id


def hierarchical_distance(tree: TaxonomyTree, records: Sequence[PredictionRecord]) -> float:
    """Arithmetic mean of node_distance(truth, prediction) over ``records``."""
    if not records:
        raise TaxonomyError("Hierarchical distance needs at least one prediction record")
    total = 0
    for rec in records:
        total += node_distance(tree, rec.true_taxon_id, rec.predicted_taxon_id)
    return total / len(records)


def accuracy(records: Sequence[PredictionRecord]) -> float:
    if not records:
        raise TaxonomyError("Accuracy needs at least one prediction record")
    return sum(1 for rec in records if rec.correct) / len(records)


# ---------------------------------------------------------------------------
# CSV interface
# ---------------------------------------------------------------------------


def write_predictions(path: str | Path, records: Iterable[PredictionRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(PREDICTION_FIELDS)
        for rec in records:
            writer.writerow([rec.annotation_id, rec.predicted_taxon_id, rec.true_taxon_id])


def read_predictions(path: str | Path) -> list[PredictionRecord]:
    records: list[PredictionRecord] = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != PREDICTION_FIELDS:
            raise TaxonomyError(
                f"Prediction file {path} must have header {','.join(PREDICTION_FIELDS)}, "
                f"got {reader.fieldnames}"
            )
        for line_no, row in enumerate(reader, start=2):
            try:
                records.append(
                    PredictionRecord(
                        annotation_id=int(row["annotation_id"]),
                        predicted_taxon_id=int(row["predicted_taxon_id"]),
                        true_taxon_id=int(row["true_taxon_id"]),
                    )
                )
            except (TypeError, ValueError):
                raise TaxonomyError(f"{path}:{line_no}: non-integer field in {row}") from None
    return records
