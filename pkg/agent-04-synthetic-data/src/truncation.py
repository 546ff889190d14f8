"""Partial labels: relabel a fraction of samples to a random proper ancestor."""

from __future__ import annotations

import logging
import math

import numpy as np

from agent_02_data_pipeline.src.dataset import Dataset, DatasetError, RoiAnnotation

logger = logging.getLogger(__name__)

_TRUNCATION_STREAM = 0x7472


def truncation_count(fraction: float, n: int) -> int:
    if not 0.0 <= fraction <= 1.0:
        raise DatasetError(f"truncate fraction must lie in [0, 1], got {fraction}")
    # tolerance for products like 0.29 * 100 = 28.999999999999996
    return min(n, math.floor(fraction * n + 1e-9))


def truncate_labels(ds: Dataset, fraction: float, seed: int) -> Dataset:
    """
    Exactly floor(fraction * N) samples get their taxon replaced by a
    proper ancestor drawn uniformly, the root included.  Samples already
    labelled with the root have no proper ancestor and are never drawn.
    """
    k = truncation_count(fraction, len(ds))
    if k == 0:
        return ds
    tree = ds.tree
    eligible = [a for a in ds.annotations if tree.rank(a.taxon_id) >= 1]
    if k > len(eligible):
        raise DatasetError(f"Cannot truncate {k} labels: only {len(eligible)} samples sit below the root")

    rng = np.random.default_rng([seed, _TRUNCATION_STREAM])
    chosen = sorted(int(i) for i in rng.choice(len(eligible), size=k, replace=False))
    relabelled: dict[int, int] = {}
    for index in chosen:
        ann = eligible[index]
        proper = tree.ancestors(ann.taxon_id)[1:]
        relabelled[ann.id] = proper[int(rng.integers(len(proper)))]

    annotations = [
        RoiAnnotation(id=a.id, image_id=a.image_id, bbox=a.bbox, taxon_id=relabelled[a.id]) if a.id in relabelled else a
        for a in ds.annotations
    ]
    logger.info("Truncated %d of %d labels (fraction %.3f, seed %d)", k, len(ds), fraction, seed)
    return ds.with_annotations(annotations)
