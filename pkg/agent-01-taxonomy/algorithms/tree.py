#!/usr/bin/env python3
"""
MATANet — Taxonomy Tree

Rooted taxonomy of taxa with integer ranks (0 = root).  Built once from
flat node records, validated, then treated as immutable: every query below
is a pure read and safe to share across threads and worker processes.

Distances use unit edges:
    d(a, b) = rank(a) + rank(b) - 2 * rank(lca(a, b))

Dependencies:
    pip install jsonschema
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

import jsonschema

logger = logging.getLogger(__name__)

SCHEMA_PATH = Path(__file__).resolve().parent.parent / "schemas" / "taxonomy_schema.json"


class TaxonomyError(ValueError):
    """Invalid taxonomy records or a query against an unknown node."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TaxonNode:
    """One taxon.  ``parent_id`` is None only for the root."""

    id: int
    name: str
    rank: int
    parent_id: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "name": self.name,
            "rank": self.rank,
            "parent_id": self.parent_id,
        }


@dataclass(frozen=True)
class TaxonomyTree:
    """Validated taxonomy.  Construct with :func:`build_tree`."""

    nodes: Mapping[int, TaxonNode]
    root_id: int
    depth: int
    level_index: tuple[tuple[int, ...], ...]
    _children: Mapping[int, tuple[int, ...]] = field(repr=False, compare=False)

    def __contains__(self, node_id: object) -> bool:
        return node_id in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, node_id: int) -> TaxonNode:
        try:
            return self.nodes[node_id]
        except (KeyError, TypeError):
            raise TaxonomyError(f"Unknown taxon id: {node_id!r}") from None

    def rank(self, node_id: int) -> int:
        return self.node(node_id).rank

    def parent(self, node_id: int) -> int | None:
        return self.node(node_id).parent_id

    def children(self, node_id: int) -> tuple[int, ...]:
        self.node(node_id)
        return self._children.get(node_id, ())

    def ancestors(self, node_id: int) -> list[int]:
        """Path from ``node_id`` up to the root, both ends included."""
        path = [node_id]
        current = self.node(node_id)
        while current.parent_id is not None:
            path.append(current.parent_id)
            current = self.nodes[current.parent_id]
        return path

    def ancestor_at(self, node_id: int, rank: int) -> int:
        """The ancestor of ``node_id`` sitting at ``rank`` (<= rank(node_id))."""
        node = self.node(node_id)
        if rank < 0 or rank > node.rank:
            raise TaxonomyError(
                f"Rank {rank} is not an ancestor rank of taxon {node_id} (rank {node.rank})"
            )
        while node.rank > rank:
            node = self.nodes[node.parent_id]  # type: ignore[index]
        return node.id

    def lca(self, a: int, b: int) -> int:
        """Lowest common ancestor of two nodes."""
        node_a = self.node(a)
        node_b = self.node(b)
        while node_a.rank > node_b.rank:
            node_a = self.nodes[node_a.parent_id]  # type: ignore[index]
        while node_b.rank > node_a.rank:
            node_b = self.nodes[node_b.parent_id]  # type: ignore[index]
        while node_a.id != node_b.id:
            node_a = self.nodes[node_a.parent_id]  # type: ignore[index]
            node_b = self.nodes[node_b.parent_id]  # type: ignore[index]
        return node_a.id

    def leaves(self) -> tuple[int, ...]:
        return tuple(nid for nid in sorted(self.nodes) if not self._children.get(nid))

    def to_records(self) -> list[dict[str, Any]]:
        """Node records in canonical (sorted-id) order, ready for JSON."""
        return [self.nodes[nid].to_dict() for nid in sorted(self.nodes)]


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def _coerce_record(record: TaxonNode | Mapping[str, Any] | tuple) -> TaxonNode:
    if isinstance(record, TaxonNode):
        return record
    if isinstance(record, Mapping):
        return TaxonNode(
            id=record["id"],
            name=record["name"],
            rank=record["rank"],
            parent_id=record.get("parent_id"),
        )
    node_id, name, rank, parent_id = record
    return TaxonNode(id=node_id, name=name, rank=rank, parent_id=parent_id)


def build_tree(node_records: Iterable[TaxonNode | Mapping[str, Any] | tuple]) -> TaxonomyTree:
    """
    Validate flat node records and build an immutable tree.

    Records may be TaxonNode instances, ``(id, name, rank, parent_id)``
    tuples or dicts with those keys, in any order.  Raises TaxonomyError
    naming the offending id on: duplicate id, missing or multiple roots,
    dangling parent, cycle, or a rank inconsistent with the parent.
    """
    records = [_coerce_record(r) for r in node_records]
    if not records:
        raise TaxonomyError("Taxonomy is empty: at least a root record is required")

    nodes: dict[int, TaxonNode] = {}
    for rec in records:
        if rec.id in nodes:
            raise TaxonomyError(f"Duplicate taxon id: {rec.id}")
        nodes[rec.id] = rec

    roots = sorted(nid for nid, n in nodes.items() if n.parent_id is None)
    if len(roots) != 1:
        raise TaxonomyError(
            f"Taxonomy must have exactly one root, found {len(roots)}: {roots}"
        )
    root_id = roots[0]

    for nid in sorted(nodes):
        parent_id = nodes[nid].parent_id
        if parent_id is not None and parent_id not in nodes:
            raise TaxonomyError(f"Taxon {nid} references unknown parent {parent_id}")

    # Every node must reach the root; anything that doesn't sits on a cycle.
    reaches_root: set[int] = {root_id}
    for nid in sorted(nodes):
        trail: list[int] = []
        on_trail: set[int] = set()
        current = nid
        while current not in reaches_root:
            if current in on_trail:
                raise TaxonomyError(f"Cycle detected through taxon {current}")
            trail.append(current)
            on_trail.add(current)
            current = nodes[current].parent_id  # type: ignore[assignment]
        reaches_root.update(trail)

    if nodes[root_id].rank != 0:
        raise TaxonomyError(f"Root taxon {root_id} must have rank 0, got {nodes[root_id].rank}")
    for nid in sorted(nodes):
        node = nodes[nid]
        if node.parent_id is None:
            continue
        expected = nodes[node.parent_id].rank + 1
        if node.rank != expected:
            raise TaxonomyError(
                f"Taxon {nid} has rank {node.rank}, expected {expected} "
                f"(parent {node.parent_id} has rank {expected - 1})"
            )

    depth = max(n.rank for n in nodes.values())
    levels: list[list[int]] = [[] for _ in range(depth + 1)]
    children: dict[int, list[int]] = {}
    for nid in sorted(nodes):
        node = nodes[nid]
        levels[node.rank].append(nid)
        if node.parent_id is not None:
            children.setdefault(node.parent_id, []).append(nid)

    return TaxonomyTree(
        nodes=nodes,
        root_id=root_id,
        depth=depth,
        level_index=tuple(tuple(level) for level in levels),
        _children={pid: tuple(kids) for pid, kids in children.items()},
    )


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------


def node_distance(tree: TaxonomyTree, a: int, b: int) -> int:
    """Number of unit edges on the tree path between ``a`` and ``b``."""
    common = tree.lca(a, b)
    return tree.rank(a) + tree.rank(b) - 2 * tree.rank(common)


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------


def validate_taxonomy_records(records: Any) -> list[str]:
    """Validate raw JSON taxonomy records against the shipped schema."""
    with open(SCHEMA_PATH, "r", encoding="utf-8") as f:
        schema = json.load(f)
    validator = jsonschema.Draft202012Validator(schema)
    return [f"{error.json_path}: {error.message}" for error in validator.iter_errors(records)]


def tree_from_json(records: Any) -> TaxonomyTree:
    """Build a tree from already-parsed JSON records, schema-checked first."""
    errors = validate_taxonomy_records(records)
    if errors:
        raise TaxonomyError("Taxonomy schema violation: " + "; ".join(errors))
    return build_tree(records)


def load_taxonomy(path: str | Path) -> TaxonomyTree:
    """Load a taxonomy JSON file (array of node records)."""
    with open(path, "r", encoding="utf-8") as f:
        records = json.load(f)
    tree = tree_from_json(records)
    logger.info("Loaded taxonomy from %s: %d taxa, depth %d", path, len(tree), tree.depth)
    return tree


def write_taxonomy(tree: TaxonomyTree, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(tree.to_records(), f, indent=2)
