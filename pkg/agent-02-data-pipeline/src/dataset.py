#!/usr/bin/env python3
"""
MATANet — Annotated Image Datasets

Reads a dataset annotation file (images + bounding-box ROIs + taxon labels
+ taxonomy), validates it against the JSON Schema in
``schemas/annotation_schema.json``, applies the semantic checks the schema
cannot express, and serves deterministic batch orders.

Each ROI is an independent sample.  Validation collects every problem
before failing, and each message names the offending record id.

Usage:
    ds = load_dataset("data/train.json")
    for batch_ids in iterate_batches(ds, batch_size=32, seed=0, epoch=0):
        ...

Dependencies:
    pip install jsonschema numpy pillow
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Iterator, Mapping

import jsonschema
import numpy as np
from PIL import Image

from agent_01_taxonomy.algorithms.tree import TaxonomyTree, tree_from_json

logger = logging.getLogger(__name__)

SCHEMA_PATH = Path(__file__).resolve().parent.parent / "schemas" / "annotation_schema.json"


class DatasetError(ValueError):
    """Dataset file failed validation, or a dataset cannot serve a request."""

    def __init__(self, message: str, errors: list[str] | None = None):
        super().__init__(message)
        self.errors = list(errors or [])


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ImageRecord:
    id: int
    path: Path
    width: int
    height: int
    file: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.id, "file": self.file, "width": self.width, "height": self.height}


@dataclass(frozen=True)
class RoiAnnotation:
    """Bounding box (x, y, w, h) in pixels, top-left origin."""

    id: int
    image_id: int
    bbox: tuple[float, float, float, float]
    taxon_id: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "image_id": self.image_id,
            "bbox": list(self.bbox),
            "taxon_id": self.taxon_id,
        }


@dataclass(frozen=True)
class Dataset:
    images: Mapping[int, ImageRecord]
    annotations: tuple[RoiAnnotation, ...]
    tree: TaxonomyTree
    split: str = "unspecified"

    def __len__(self) -> int:
        return len(self.annotations)

    @property
    def annotation_ids(self) -> tuple[int, ...]:
        return tuple(a.id for a in self.annotations)

    def annotation_map(self) -> dict[int, RoiAnnotation]:
        return {a.id: a for a in self.annotations}

    def image_for(self, ann: RoiAnnotation) -> ImageRecord:
        return self.images[ann.image_id]

    def terminals(self) -> list[int]:
        return [a.taxon_id for a in self.annotations]

    def counts(self) -> dict[str, int]:
        return {
            "images": len(self.images),
            "rois": len(self.annotations),
            "classes": len(set(self.terminals())),
        }

    def with_annotations(self, annotations: list[RoiAnnotation] | tuple[RoiAnnotation, ...]) -> "Dataset":
        return replace(self, annotations=tuple(sorted(annotations, key=lambda a: a.id)))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _load_schema() -> dict[str, Any]:
    with open(SCHEMA_PATH, "r", encoding="utf-8") as f:
        return json.load(f)


def _record_label(payload: dict[str, Any], path: list[Any]) -> str:
    """Name the record a schema error sits in, e.g. 'annotation 17'."""
    if len(path) >= 2 and path[0] in ("images", "annotations", "taxonomy"):
        section = payload.get(path[0])
        if isinstance(section, list) and isinstance(path[1], int) and path[1] < len(section):
            rec = section[path[1]]
            rid = rec.get("id") if isinstance(rec, dict) else None
            singular = {"images": "image", "annotations": "annotation", "taxonomy": "taxon"}[path[0]]
            return f"{singular} {rid}"
    return "file"


def validate_schema(payload: Any) -> list[str]:
    validator = jsonschema.Draft202012Validator(_load_schema())
    errors = []
    for error in sorted(validator.iter_errors(payload), key=lambda e: list(map(str, e.absolute_path))):
        label = _record_label(payload, list(error.absolute_path)) if isinstance(payload, dict) else "file"
        errors.append(f"{label}: {error.json_path}: {error.message}")
    return errors


def validate_records(
    images: list[dict[str, Any]],
    annotations: list[dict[str, Any]],
    tree: TaxonomyTree,
    image_root: Path,
) -> list[str]:
    """Semantic checks; returns human-readable errors naming record ids."""
    errors: list[str] = []
    sizes: dict[int, tuple[int, int]] = {}

    for img in images:
        iid = img["id"]
        if iid in sizes:
            errors.append(f"image {iid}: duplicate image id")
            continue
        if img["width"] <= 0 or img["height"] <= 0:
            errors.append(f"image {iid}: width and height must be > 0, got {img['width']}x{img['height']}")
        if not (image_root / img["file"]).is_file():
            errors.append(f"image {iid}: missing image file {image_root / img['file']}")
        sizes[iid] = (img["width"], img["height"])

    seen: set[int] = set()
    for ann in annotations:
        aid = ann["id"]
        if aid in seen:
            errors.append(f"annotation {aid}: duplicate annotation id")
            continue
        seen.add(aid)
        x, y, w, h = ann["bbox"]
        if w <= 0:
            errors.append(f"annotation {aid}: bbox width must be > 0, got {w}")
        if h <= 0:
            errors.append(f"annotation {aid}: bbox height must be > 0, got {h}")
        if x < 0 or y < 0:
            errors.append(f"annotation {aid}: bbox origin must be non-negative, got ({x}, {y})")
        if ann["image_id"] not in sizes:
            errors.append(f"annotation {aid}: unknown image_id {ann['image_id']}")
        else:
            width, height = sizes[ann["image_id"]]
            if x >= width or y >= height:
                errors.append(
                    f"annotation {aid}: bbox ({x}, {y}, {w}, {h}) does not intersect "
                    f"image {ann['image_id']} ({width}x{height})"
                )
        if ann["taxon_id"] not in tree:
            errors.append(f"annotation {aid}: unknown taxon_id {ann['taxon_id']}")

    return errors


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def dataset_from_payload(
    payload: Any,
    image_root: str | Path,
    split: str | None = None,
    source: str = "<memory>",
) -> Dataset:
    image_root = Path(image_root)
    errors = validate_schema(payload)
    if errors:
        for err in errors:
            logger.warning("Rejected: %s", err)
        raise DatasetError(f"{source}: {len(errors)} schema violation(s): " + "; ".join(errors), errors)

    tree = tree_from_json(payload["taxonomy"])
    errors = validate_records(payload["images"], payload["annotations"], tree, image_root)
    if errors:
        for err in errors:
            logger.warning("Rejected: %s", err)
        raise DatasetError(f"{source}: {len(errors)} invalid record(s): " + "; ".join(errors), errors)

    images = {
        img["id"]: ImageRecord(
            id=img["id"],
            path=image_root / img["file"],
            width=img["width"],
            height=img["height"],
            file=img["file"],
        )
        for img in sorted(payload["images"], key=lambda i: i["id"])
    }
    annotations = tuple(
        RoiAnnotation(
            id=ann["id"],
            image_id=ann["image_id"],
            bbox=tuple(float(v) for v in ann["bbox"]),  # type: ignore[arg-type]
            taxon_id=ann["taxon_id"],
        )
        for ann in sorted(payload["annotations"], key=lambda a: a["id"])
    )
    ds = Dataset(
        images=images,
        annotations=annotations,
        tree=tree,
        split=split or payload.get("split") or "unspecified",
    )
    counts = ds.counts()
    logger.info(
        "Loaded dataset %s (split=%s): %d images, %d ROIs, %d classes",
        source,
        ds.split,
        counts["images"],
        counts["rois"],
        counts["classes"],
    )
    return ds


def load_dataset(
    annotation_file: str | Path,
    image_root: str | Path | None = None,
    split: str | None = None,
) -> Dataset:
    """Load and validate a dataset.  Image paths resolve against ``image_root``
    (default: the annotation file's directory)."""
    annotation_file = Path(annotation_file)
    if not annotation_file.is_file():
        raise DatasetError(f"Annotation file not found: {annotation_file}")
    try:
        with open(annotation_file, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{annotation_file}: not valid JSON ({exc})") from None
    root = Path(image_root) if image_root is not None else annotation_file.parent
    return dataset_from_payload(payload, root, split=split, source=str(annotation_file))


def save_dataset(ds: Dataset, path: str | Path) -> None:
    """Write ``ds`` back in the annotation schema.  Image file entries keep
    their original relative paths."""
    payload = {
        "split": ds.split,
        "images": [ds.images[iid].to_dict() for iid in sorted(ds.images)],
        "annotations": [a.to_dict() for a in ds.annotations],
        "taxonomy": ds.tree.to_records(),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
    logger.info("Wrote dataset %s (%d ROIs)", path, len(ds))


def load_image(record: ImageRecord) -> np.ndarray:
    """Decode to float32 H x W x 3 in [0, 1]; grayscale is replicated."""
    with Image.open(record.path) as img:
        rgb = img.convert("RGB")
        array = np.asarray(rgb, dtype=np.float32) / 255.0
    if array.shape[:2] != (record.height, record.width):
        raise DatasetError(
            f"image {record.id}: decoded size {array.shape[1]}x{array.shape[0]} "
            f"does not match declared {record.width}x{record.height}"
        )
    return array


# ---------------------------------------------------------------------------
# Batching
# ---------------------------------------------------------------------------


def epoch_order(ds: Dataset, seed: int, epoch: int) -> list[int]:
    """Seeded permutation of all annotation ids; depends only on (seed, epoch)."""
    if len(ds) == 0:
        raise DatasetError("Cannot iterate an empty dataset")
    rng = np.random.default_rng([seed, epoch])
    ids = np.asarray(ds.annotation_ids)
    return [int(i) for i in ids[rng.permutation(len(ids))]]


def iterate_batches(ds: Dataset, batch_size: int, seed: int, epoch: int) -> Iterator[list[int]]:
    if batch_size < 1:
        raise DatasetError(f"batch_size must be >= 1, got {batch_size}")
    order = epoch_order(ds, seed, epoch)
    return (order[start:start + batch_size] for start in range(0, len(order), batch_size))
