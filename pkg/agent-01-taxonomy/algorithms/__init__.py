"""MATANet — Taxonomy Algorithms."""

from .tree import (
    TaxonNode,
    TaxonomyError,
    TaxonomyTree,
    build_tree,
    load_taxonomy,
    node_distance,
    tree_from_json,
    write_taxonomy,
)
from .hierarchical_distance import (
    PredictionRecord,
    accuracy,
    hierarchical_distance,
    read_predictions,
    write_predictions,
)
from .labels import (
    HierarchicalLabel,
    LabelSpace,
    LevelShuffle,
    LevelTarget,
    build_level_spaces,
    default_hierarchy_ranks,
    derive_hierarchical_label,
    level_class_count,
    level_label_space,
    shuffle_levels,
    terminal_label_space,
)

__all__ = [
    "TaxonNode",
    "TaxonomyError",
    "TaxonomyTree",
    "build_tree",
    "load_taxonomy",
    "node_distance",
    "tree_from_json",
    "write_taxonomy",
    "PredictionRecord",
    "accuracy",
    "hierarchical_distance",
    "read_predictions",
    "write_predictions",
    "HierarchicalLabel",
    "LabelSpace",
    "LevelShuffle",
    "LevelTarget",
    "build_level_spaces",
    "default_hierarchy_ranks",
    "derive_hierarchical_label",
    "level_class_count",
    "level_label_space",
    "shuffle_levels",
    "terminal_label_space",
]
