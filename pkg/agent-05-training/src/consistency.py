"""
MATANet — Embedding Hierarchy Consistency

Two numbers summarising how the fused embeddings of a labelled set are
organised relative to the taxonomy:

    intra_inter_ratio   mean pairwise distance within a terminal class over
                        the mean distance between classes (lower = tighter)
    rank_correlation    Spearman correlation between pairwise embedding
                        distance and pairwise tree distance of the labels

Pairs are all i < j, subsampled without replacement to ``max_pairs``.

Dependencies:
    pip install numpy scipy
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.distance import pdist
from scipy.stats import spearmanr

from agent_01_taxonomy.algorithms.tree import TaxonomyError, TaxonomyTree, node_distance

logger = logging.getLogger(__name__)

DEFAULT_MAX_PAIRS = 50_000


@dataclass(frozen=True)
class ConsistencyStats:
    intra_inter_ratio: float
    rank_correlation: float
    n_pairs: int
    n_classes: int

    def to_dict(self) -> dict:
        return asdict(self)


def class_distance_matrix(tree: TaxonomyTree, classes: Sequence[int]) -> np.ndarray:
    k = len(classes)
    out = np.zeros((k, k), dtype=np.int64)
    for a in range(k):
        for b in range(a + 1, k):
            out[a, b] = out[b, a] = node_distance(tree, classes[a], classes[b])
    return out


def hierarchy_consistency_stat(
    z: np.ndarray,
    taxon_ids: Sequence[int],
    tree: TaxonomyTree,
    max_pairs: int = DEFAULT_MAX_PAIRS,
    seed: int = 0,
) -> ConsistencyStats:
    z = np.asarray(z, dtype=np.float64)
    taxa = np.asarray(taxon_ids, dtype=np.int64)
    if z.ndim != 2 or len(z) != len(taxa):
        raise ValueError(f"Embeddings {z.shape} do not match {len(taxa)} labels")
    classes, class_index = np.unique(taxa, return_inverse=True)
    if len(classes) < 2:
        raise TaxonomyError(f"Consistency statistics need at least 2 classes, got {len(classes)}")

    embed = pdist(z)
    i, j = np.triu_indices(len(z), k=1)
    same = taxa[i] == taxa[j]
    inter = embed[~same].mean()
    ratio = float(embed[same].mean() / inter) if same.any() and inter > 0 else float("nan")

    if len(embed) > max_pairs:
        keep = np.sort(np.random.default_rng(seed).choice(len(embed), size=max_pairs, replace=False))
        embed, i, j = embed[keep], i[keep], j[keep]
    tree_d = class_distance_matrix(tree, [int(c) for c in classes])[class_index[i], class_index[j]]
    rho, _ = spearmanr(embed, tree_d)

    stats = ConsistencyStats(
        intra_inter_ratio=ratio,
        rank_correlation=float(rho),
        n_pairs=int(len(embed)),
        n_classes=int(len(classes)),
    )
    logger.info(
        "Embedding consistency: intra/inter %.4f, rank correlation %.4f over %d pairs",
        stats.intra_inter_ratio,
        stats.rank_correlation,
        stats.n_pairs,
        extra=stats.to_dict(),
    )
    return stats
