"""MATANet — Data Pipeline (dataset ingestion, ROI/context crops, augmentation)."""

from .dataset import (
    Dataset,
    DatasetError,
    ImageRecord,
    RoiAnnotation,
    iterate_batches,
    load_dataset,
    load_image,
    save_dataset,
)
from .roi_context import (
    SCALE_TOKENS,
    ContextSet,
    CropError,
    CropWindow,
    build_context_set,
    context_window,
    extract,
    full_window,
    square_roi_window,
)
from .augment import AugmentConfig, augment

__all__ = [
    "Dataset",
    "DatasetError",
    "ImageRecord",
    "RoiAnnotation",
    "iterate_batches",
    "load_dataset",
    "load_image",
    "save_dataset",
    "SCALE_TOKENS",
    "ContextSet",
    "CropError",
    "CropWindow",
    "build_context_set",
    "context_window",
    "extract",
    "full_window",
    "square_roi_window",
    "AugmentConfig",
    "augment",
]
