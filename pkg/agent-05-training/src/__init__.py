"""MATANet — Training and Evaluation (loop, metrics, exports, ablations)."""

from .config import AugmentSettings, EncoderSettings, TrainConfig
from .data import LabelSpaces, RoiDataset, build_label_spaces
from .trainer import EpochLosses, Trainer, TrainResult, train
from .evaluation import EvaluationResult, MetricsReport, evaluate, run_inference
from .exports import EmbeddingTable, export_attention, export_embeddings, read_embeddings
from .consistency import ConsistencyStats, hierarchy_consistency_stat
from .ablation import VARIANTS, run_ablation

__all__ = [
    "AugmentSettings",
    "EncoderSettings",
    "TrainConfig",
    "LabelSpaces",
    "RoiDataset",
    "build_label_spaces",
    "EpochLosses",
    "Trainer",
    "TrainResult",
    "train",
    "EvaluationResult",
    "MetricsReport",
    "evaluate",
    "run_inference",
    "EmbeddingTable",
    "export_attention",
    "export_embeddings",
    "read_embeddings",
    "ConsistencyStats",
    "hierarchy_consistency_stat",
    "VARIANTS",
    "run_ablation",
]
