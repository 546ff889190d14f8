"""Tests for agent-01-taxonomy — level-wise labels, label spaces and shuffles."""

import numpy as np
import pytest

from agent_01_taxonomy.algorithms.labels import (
    build_level_spaces,
    default_hierarchy_ranks,
    derive_hierarchical_label,
    level_class_count,
    shuffle_levels,
    terminal_label_space,
)
from agent_01_taxonomy.algorithms.tree import TaxonomyError, build_tree
from tests.factories import balanced_tree_records, random_tree_records


@pytest.fixture
def five_level_tree():
    # root -> 2 -> 2 -> 2 -> 2 -> 2: ranks 0..5
    return build_tree(balanced_tree_records((2, 2, 2, 2, 2)))


# ---- derive_hierarchical_label ----------------------------------------------


class TestDeriveHierarchicalLabel:
    def test_full_depth_terminal(self, five_level_tree):
        leaf = five_level_tree.level_index[5][0]
        label = derive_hierarchical_label(five_level_tree, leaf)
        assert len(label.targets) == 5
        assert not any(t.interpolated for t in label.targets)
        assert label.at(5).node_id == leaf
        assert label.terminal == leaf

    def test_missing_species_interpolates_genus(self, five_level_tree):
        genus = five_level_tree.level_index[4][1]
        label = derive_hierarchical_label(five_level_tree, genus)
        assert label.at(4).node_id == genus
        assert not label.at(4).interpolated
        assert label.at(5).node_id == genus
        assert label.at(5).interpolated

    def test_root_terminal(self, five_level_tree):
        label = derive_hierarchical_label(five_level_tree, five_level_tree.root_id)
        assert all(t.interpolated and t.node_id == five_level_tree.root_id for t in label.targets)

    def test_unknown_id(self, five_level_tree):
        with pytest.raises(TaxonomyError):
            derive_hierarchical_label(five_level_tree, 10_000)

    def test_chain_consistency_random_trees(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            tree = build_tree(random_tree_records(rng, 30))
            for node_id in tree.nodes:
                label = derive_hierarchical_label(tree, node_id)
                previous = tree.root_id
                seen_interpolated = False
                for rank in range(1, tree.depth + 1):
                    target = label.at(rank)
                    if seen_interpolated:
                        assert target.interpolated
                    seen_interpolated = target.interpolated
                    if target.interpolated:
                        assert target.node_id == node_id
                    else:
                        assert tree.parent(target.node_id) == previous
                        previous = target.node_id

    def test_at_out_of_range(self, five_level_tree):
        label = derive_hierarchical_label(five_level_tree, five_level_tree.root_id)
        with pytest.raises(TaxonomyError):
            label.at(0)


# ---- label spaces -----------------------------------------------------------


class TestLevelClassCount:
    def test_rank_zero(self):
        tree = build_tree(balanced_tree_records((2, 2)))
        assert level_class_count(tree, 0) == 1

    def test_without_interpolation(self):
        tree = build_tree(balanced_tree_records((2, 2)))
        assert level_class_count(tree, 2, tree.leaves()) == 4

    def test_genus_terminal_adds_one(self):
        tree = build_tree(balanced_tree_records((2, 2)))
        observed = list(tree.leaves()) + [1, 1]
        assert level_class_count(tree, 2, observed) == 4 + 1
        assert level_class_count(tree, 1, observed) == 2

    def test_rank_out_of_range(self):
        tree = build_tree(balanced_tree_records((2,)))
        with pytest.raises(TaxonomyError):
            level_class_count(tree, 2)

    def test_extras_follow_level_nodes(self):
        tree = build_tree(balanced_tree_records((2, 2)))
        spaces = build_level_spaces(tree, [3, 2, 1])
        assert spaces[2].node_ids == (3, 4, 5, 6, 1, 2)
        assert spaces[2].index_of(2) == 5


class TestTerminalLabelSpace:
    def test_sorted_distinct(self):
        tree = build_tree(balanced_tree_records((2, 2)))
        space = terminal_label_space(tree, [6, 3, 3, 1])
        assert space.node_ids == (1, 3, 6)

    def test_unknown_rejected(self):
        tree = build_tree(balanced_tree_records((2,)))
        with pytest.raises(TaxonomyError):
            terminal_label_space(tree, [1, 50])

    def test_index_of_missing(self):
        tree = build_tree(balanced_tree_records((2,)))
        with pytest.raises(TaxonomyError):
            terminal_label_space(tree, [1]).index_of(2)


class TestDefaultHierarchyRanks:
    def test_excludes_terminal_rank(self):
        tree = build_tree(balanced_tree_records((3, 2, 2)))
        assert default_hierarchy_ranks(tree) == (1, 2)
        assert default_hierarchy_ranks(tree, include_terminal_rank=True) == (1, 2, 3)


# ---- shuffle_levels ---------------------------------------------------------


class TestShuffleLevels:
    def test_deterministic(self):
        tree = build_tree(balanced_tree_records((3, 2, 2)))
        assert shuffle_levels(tree, 4) == shuffle_levels(tree, 4)

    def test_seed_changes_table(self):
        tree = build_tree(balanced_tree_records((3, 2, 2)))
        assert shuffle_levels(tree, 4).permutations != shuffle_levels(tree, 5).permutations

    def test_single_class_level_is_identity(self):
        tree = build_tree(balanced_tree_records((1, 3)))
        table = shuffle_levels(tree, 0)
        assert table.permutation(1) == tuple(range(3))

    def test_inverse_composes_to_identity(self):
        tree = build_tree(balanced_tree_records((3, 2, 2)))
        table = shuffle_levels(tree, 1)
        for rank in range(1, tree.depth + 1):
            perm = table.permutation(rank)
            inv = table.inverse(rank)
            assert tuple(perm[inv[i]] for i in range(len(perm))) == tuple(range(len(perm)))
            assert sorted(perm) == list(range(len(perm)))

    def test_targets_stay_in_level_space(self):
        tree = build_tree(balanced_tree_records((3, 2, 2)))
        observed = list(tree.leaves()) + [1]
        table = shuffle_levels(tree, 2, observed)
        spaces = build_level_spaces(tree, observed)
        for terminal in table.terminal_ids:
            for rank in (1, 2, 3):
                assert table.target(tree, terminal, rank).node_id in spaces[rank]

    def test_class_counts_preserved(self):
        tree = build_tree(balanced_tree_records((3, 2, 2)))
        table = shuffle_levels(tree, 6)
        for rank in (1, 2):
            true_counts = sorted(
                [derive_hierarchical_label(tree, t).at(rank).node_id for t in table.terminal_ids].count(n)
                for n in tree.level_index[rank]
            )
            shuffled = [table.target(tree, t, rank).node_id for t in table.terminal_ids]
            shuffled_counts = sorted(shuffled.count(n) for n in tree.level_index[rank])
            assert shuffled_counts == true_counts

    def test_moves_terminals_between_groups(self):
        tree = build_tree(balanced_tree_records((3, 2, 2)))
        table = shuffle_levels(tree, 3)
        groups: dict[int, set[int]] = {}
        for terminal in table.terminal_ids:
            shuffled = table.target(tree, terminal, 1).node_id
            groups.setdefault(shuffled, set()).add(tree.ancestor_at(terminal, 1))
        # some shuffled rank-1 class gathers terminals of several true classes
        assert any(len(true_classes) > 1 for true_classes in groups.values())
