#!/usr/bin/env python3
"""
MATANet — Level-wise Labels

Turns a sample's terminal taxon into per-rank targets for the auxiliary
level classifiers, and sizes those classifiers.

Interpolation: when a sample terminates above rank ℓ (e.g. only the genus
is known), its rank-ℓ target is the terminal itself, flagged as
interpolated.  The level-ℓ label space is therefore the rank-ℓ nodes
followed by every shallower terminal observed in the training set, so each
level head stays an ordinary flat classifier.

Dependencies:
    pip install numpy
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .tree import TaxonomyError, TaxonomyTree


# ---------------------------------------------------------------------------
# Hierarchical labels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LevelTarget:
    node_id: int
    interpolated: bool = False


@dataclass(frozen=True)
class HierarchicalLabel:
    """Targets for ranks 1..L; ``targets[ℓ - 1]`` is the rank-ℓ entry."""

    targets: tuple[LevelTarget, ...]
    terminal: int

    def at(self, rank: int) -> LevelTarget:
        if rank < 1 or rank > len(self.targets):
            raise TaxonomyError(f"Rank {rank} outside label ranks 1..{len(self.targets)}")
        return self.targets[rank - 1]

    @property
    def node_ids(self) -> tuple[int, ...]:
        return tuple(t.node_id for t in self.targets)


def derive_hierarchical_label(tree: TaxonomyTree, terminal: int) -> HierarchicalLabel:
    """Ancestor chain of ``terminal``, interpolated below its rank."""
    terminal_rank = tree.rank(terminal)
    targets = []
    for rank in range(1, tree.depth + 1):
        if rank <= terminal_rank:
            targets.append(LevelTarget(tree.ancestor_at(terminal, rank), interpolated=False))
        else:
            targets.append(LevelTarget(terminal, interpolated=True))
    return HierarchicalLabel(targets=tuple(targets), terminal=terminal)


# ---------------------------------------------------------------------------
# Label spaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LabelSpace:
    """Ordered class list of one classifier head."""

    node_ids: tuple[int, ...]
    rank: int | None = None

    def __len__(self) -> int:
        return len(self.node_ids)

    def __contains__(self, node_id: object) -> bool:
        return node_id in self.node_ids

    def index_of(self, node_id: int) -> int:
        try:
            return self.node_ids.index(node_id)
        except ValueError:
            where = "terminal" if self.rank is None else f"rank-{self.rank}"
            raise TaxonomyError(f"Taxon {node_id} is not in the {where} label space") from None

    def node_at(self, index: int) -> int:
        if index < 0 or index >= len(self.node_ids):
            raise TaxonomyError(f"Class index {index} out of range for {len(self.node_ids)} classes")
        return self.node_ids[index]


def level_label_space(tree: TaxonomyTree, rank: int, observed_terminals: Iterable[int] = ()) -> LabelSpace:
    """Rank-ℓ nodes (sorted) followed by the sorted interpolated extras."""
    if rank < 0 or rank > tree.depth:
        raise TaxonomyError(f"Rank {rank} out of range 0..{tree.depth}")
    extras = sorted({t for t in observed_terminals if tree.rank(t) < rank})
    return LabelSpace(node_ids=tuple(tree.level_index[rank]) + tuple(extras), rank=rank)


def level_class_count(tree: TaxonomyTree, rank: int, observed_terminals: Iterable[int] = ()) -> int:
    return len(level_label_space(tree, rank, observed_terminals))


def build_level_spaces(tree: TaxonomyTree, observed_terminals: Iterable[int] = ()) -> dict[int, LabelSpace]:
    terminals = sorted(set(observed_terminals))
    return {rank: level_label_space(tree, rank, terminals) for rank in range(tree.depth + 1)}


def terminal_label_space(tree: TaxonomyTree, observed_terminals: Iterable[int]) -> LabelSpace:
    """Class list of the final classifier: every distinct training terminal."""
    terminals = sorted(set(observed_terminals))
    for t in terminals:
        tree.node(t)
    if not terminals:
        raise TaxonomyError("Terminal label space is empty")
    return LabelSpace(node_ids=tuple(terminals))


def default_hierarchy_ranks(tree: TaxonomyTree, include_terminal_rank: bool = False) -> tuple[int, ...]:
    """Ranks that get an auxiliary head: 1..L-1, plus L on request."""
    last = tree.depth if include_terminal_rank else tree.depth - 1
    return tuple(range(1, last + 1))


# ---------------------------------------------------------------------------
# Shuffled control
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LevelShuffle:
    """
    Fixed per-rank permutation table for the shuffled-hierarchy control.

    ``permutations[ℓ]`` permutes positions of ``terminal_ids``: a sample
    with terminal t takes its rank-ℓ target from the lineage of
    ``terminal_ids[permutations[ℓ][index(t)]]``.  Relabelling level classes
    one-to-one would leave the grouping of samples intact, so the shuffle
    moves terminals between level-ℓ groups instead; class counts per level
    are preserved.
    """

    seed: int
    terminal_ids: tuple[int, ...]
    permutations: Mapping[int, tuple[int, ...]]

    def permutation(self, rank: int) -> tuple[int, ...]:
        try:
            return self.permutations[rank]
        except KeyError:
            raise TaxonomyError(f"No shuffle drawn for rank {rank}") from None

    def inverse(self, rank: int) -> tuple[int, ...]:
        perm = self.permutation(rank)
        inv = [0] * len(perm)
        for position, target in enumerate(perm):
            inv[target] = position
        return tuple(inv)

    def shuffled_terminal(self, terminal: int, rank: int) -> int:
        try:
            position = self.terminal_ids.index(terminal)
        except ValueError:
            raise TaxonomyError(f"Taxon {terminal} is not a shuffled terminal") from None
        return self.terminal_ids[self.permutation(rank)[position]]

    def target(self, tree: TaxonomyTree, terminal: int, rank: int) -> LevelTarget:
        source = self.shuffled_terminal(terminal, rank)
        return derive_hierarchical_label(tree, source).at(rank)


def shuffle_levels(
    tree: TaxonomyTree,
    seed: int,
    observed_terminals: Iterable[int] | None = None,
) -> LevelShuffle:
    """
    Draw the shuffle table once from ``seed``.

    Ranks whose label space has a single class get the identity.
    """
    terminals = tuple(sorted(set(observed_terminals))) if observed_terminals is not None else tree.leaves()
    spaces = build_level_spaces(tree, terminals)
    permutations: dict[int, tuple[int, ...]] = {}
    for rank in range(1, tree.depth + 1):
        if len(spaces[rank]) <= 1:
            permutations[rank] = tuple(range(len(terminals)))
            continue
        rng = np.random.default_rng([seed, rank])
        permutations[rank] = tuple(int(i) for i in rng.permutation(len(terminals)))
    return LevelShuffle(seed=seed, terminal_ids=terminals, permutations=permutations)
