"""
MATANet — ROI Nearest-Neighbour Probe

Estimates how much of the terminal class is recoverable from ROI pixels
alone: every ROI is cropped with the square-ROI rule, shrunk to a small
thumbnail, and classified by its nearest training thumbnail.

Dependencies:
    pip install numpy scikit-learn
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from sklearn.neighbors import KNeighborsClassifier

from agent_02_data_pipeline.src.dataset import Dataset, load_image
from agent_02_data_pipeline.src.roi_context import extract, square_roi_window

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProbeResult:
    accuracy: float
    ambiguous_accuracy: float | None
    n_test: int
    n_ambiguous: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "ambiguous_accuracy": self.ambiguous_accuracy,
            "n_test": self.n_test,
            "n_ambiguous": self.n_ambiguous,
        }


def roi_thumbnails(ds: Dataset, side: int = 16) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(features N x side*side*3, labels N, annotation ids N)."""
    features, labels, ids = [], [], []
    for ann in ds.annotations:
        image = load_image(ds.image_for(ann))
        features.append(extract(image, square_roi_window(ann.bbox), side).reshape(-1))
        labels.append(ann.taxon_id)
        ids.append(ann.id)
    return np.stack(features), np.asarray(labels), np.asarray(ids)


def nearest_neighbor_probe(
    train: Dataset,
    test: Dataset,
    ambiguous_ids: Iterable[int] = (),
    side: int = 16,
) -> ProbeResult:
    x_train, y_train, _ = roi_thumbnails(train, side)
    x_test, y_test, test_ids = roi_thumbnails(test, side)
    knn = KNeighborsClassifier(n_neighbors=1)
    knn.fit(x_train, y_train)
    correct = knn.predict(x_test) == y_test

    ambiguous = np.isin(test_ids, np.asarray(list(ambiguous_ids), dtype=np.int64))
    result = ProbeResult(
        accuracy=float(correct.mean()),
        ambiguous_accuracy=float(correct[ambiguous].mean()) if ambiguous.any() else None,
        n_test=int(len(correct)),
        n_ambiguous=int(ambiguous.sum()),
    )
    logger.info(
        "ROI 1-NN probe: accuracy %.3f, ambiguous accuracy %s over %d ambiguous samples",
        result.accuracy,
        "n/a" if result.ambiguous_accuracy is None else f"{result.ambiguous_accuracy:.3f}",
        result.n_ambiguous,
    )
    return result
