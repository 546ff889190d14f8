"""
MATANet — Training Data Adapter

Binds the annotation dataset, the ROI/context cropper and the augmenter to
``torch.utils.data``.  Items are keyed by annotation id, so a batch sampler
that yields id lists (``iterate_batches``) drives the loader directly and
the batch composition depends only on (seed, epoch).

Usage:
    labels = build_label_spaces(train.tree, train.terminals(), hslm="on")
    items = RoiDataset(train, scales=("3", "5", "full"), crop_side=64, labels=labels)
    loader = train_loader(items, batch_size=32, seed=0)
    for epoch in range(epochs):
        loader.batch_sampler.set_epoch(epoch)
        items.set_epoch(epoch)
        for batch in loader: ...

Dependencies:
    pip install torch numpy
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Mapping, Sequence

import numpy as np
import torch
from torch.utils.data import BatchSampler, DataLoader, Sampler
from torch.utils.data import Dataset as TorchDataset

from agent_01_taxonomy.algorithms.labels import (
    LabelSpace,
    LevelShuffle,
    default_hierarchy_ranks,
    derive_hierarchical_label,
    level_label_space,
    shuffle_levels,
    terminal_label_space,
)
from agent_01_taxonomy.algorithms.tree import TaxonomyTree
from agent_02_data_pipeline.src.augment import AugmentConfig, augment
from agent_02_data_pipeline.src.dataset import Dataset, DatasetError, iterate_batches, load_image
from agent_02_data_pipeline.src.roi_context import ContextSet, build_context_set

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Label spaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LabelSpaces:
    """Class lists of the terminal classifier and of every supervised rank."""

    tree: TaxonomyTree
    terminal: LabelSpace
    levels: Mapping[int, LabelSpace] = field(default_factory=dict)
    shuffle: LevelShuffle | None = None

    @property
    def level_sizes(self) -> dict[int, int]:
        return {rank: len(space) for rank, space in sorted(self.levels.items())}

    @property
    def level_ids(self) -> dict[int, tuple[int, ...]]:
        return {rank: space.node_ids for rank, space in sorted(self.levels.items())}

    def terminal_index(self, taxon_id: int) -> int:
        return self.terminal.index_of(taxon_id)

    def level_indices(self, taxon_id: int) -> dict[int, int]:
        if not self.levels:
            return {}
        label = derive_hierarchical_label(self.tree, taxon_id)
        out = {}
        for rank, space in self.levels.items():
            target = self.shuffle.target(self.tree, taxon_id, rank) if self.shuffle else label.at(rank)
            out[rank] = space.index_of(target.node_id)
        return out


def build_label_spaces(
    tree: TaxonomyTree,
    terminals: Iterable[int],
    hslm: str = "on",
    include_terminal_rank: bool = False,
    seed: int = 0,
) -> LabelSpaces:
    """Label spaces of a training run.  ``hslm="random"`` also draws the
    per-rank shuffle table from ``seed``."""
    observed = sorted(set(terminals))
    terminal = terminal_label_space(tree, observed)
    if hslm == "off":
        return LabelSpaces(tree=tree, terminal=terminal)
    ranks = default_hierarchy_ranks(tree, include_terminal_rank)
    levels = {rank: level_label_space(tree, rank, observed) for rank in ranks}
    shuffle = shuffle_levels(tree, seed, observed) if hslm == "random" else None
    logger.info(
        "Label spaces: %d terminal classes, level heads %s%s",
        len(terminal),
        {rank: len(space) for rank, space in levels.items()},
        " (shuffled)" if shuffle else "",
    )
    return LabelSpaces(tree=tree, terminal=terminal, levels=levels, shuffle=shuffle)


# ---------------------------------------------------------------------------
# Items
# ---------------------------------------------------------------------------


def to_chw(array: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(array.transpose(2, 0, 1), dtype=np.float32))


class RoiDataset(TorchDataset):
    """
    Map-style dataset indexed by annotation id.

    Each item is a dict with ``annotation_id``, ``taxon_id``, ``roi``
    (3 x S x S), ``contexts`` ({scale: 3 x S x S}) and, when label spaces are
    given, ``terminal`` and ``levels`` ({rank: class index}).
    """

    def __init__(
        self,
        ds: Dataset,
        scales: Sequence[str],
        crop_side: int,
        labels: LabelSpaces | None = None,
        augmentation: AugmentConfig | None = None,
        seed: int = 0,
    ):
        if len(ds) == 0:
            raise DatasetError("Cannot build ROI items from an empty dataset")
        self.ds = ds
        self.scales = tuple(scales)
        self.crop_side = crop_side
        self.labels = labels
        self.augmentation = augmentation
        self.seed = seed
        self.epoch = 0
        self._annotations = ds.annotation_map()

    def __len__(self) -> int:
        return len(self.ds)

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch

    def context_set(self, annotation_id: int) -> ContextSet:
        ann = self._annotations.get(annotation_id)
        if ann is None:
            raise DatasetError(f"Unknown annotation id {annotation_id}")
        image = load_image(self.ds.image_for(ann))
        cs = build_context_set(image, ann.bbox, self.scales, self.crop_side)
        if self.augmentation is not None:
            cs = augment(cs, self.seed, annotation_id, self.epoch, self.augmentation)
        return cs

    def __getitem__(self, annotation_id: int) -> dict[str, Any]:
        cs = self.context_set(int(annotation_id))
        ann = self._annotations[int(annotation_id)]
        item: dict[str, Any] = {
            "annotation_id": ann.id,
            "taxon_id": ann.taxon_id,
            "roi": to_chw(cs.roi),
            "contexts": {tag: to_chw(array) for tag, array in cs.contexts},
        }
        if self.labels is not None:
            item["terminal"] = self.labels.terminal_index(ann.taxon_id)
            item["levels"] = self.labels.level_indices(ann.taxon_id)
        return item


# ---------------------------------------------------------------------------
# Loaders
# ---------------------------------------------------------------------------


class EpochBatchSampler(Sampler[list[int]]):
    """Yields the seeded per-epoch batches of annotation ids."""

    def __init__(self, ds: Dataset, batch_size: int, seed: int):
        self.ds = ds
        self.batch_size = batch_size
        self.seed = seed
        self.epoch = 0

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch

    def __iter__(self) -> Iterator[list[int]]:
        return iter(iterate_batches(self.ds, self.batch_size, self.seed, self.epoch))

    def __len__(self) -> int:
        return math.ceil(len(self.ds) / self.batch_size)


def train_loader(items: RoiDataset, batch_size: int, seed: int, num_workers: int = 0) -> DataLoader:
    return DataLoader(
        items,
        batch_sampler=EpochBatchSampler(items.ds, batch_size, seed),
        num_workers=num_workers,
    )


def eval_loader(items: RoiDataset, batch_size: int, num_workers: int = 0) -> DataLoader:
    """Batches in ascending annotation-id order."""
    return DataLoader(
        items,
        batch_sampler=BatchSampler(sorted(items.ds.annotation_ids), batch_size, drop_last=False),
        num_workers=num_workers,
    )


def model_inputs(
    batch: Mapping[str, Any], scales: Sequence[str], device: torch.device | str = "cpu"
) -> tuple[torch.Tensor, list[tuple[str, torch.Tensor]]]:
    roi = batch["roi"].to(device)
    contexts = [(scale, batch["contexts"][scale].to(device)) for scale in scales]
    return roi, contexts
