"""MATANet — Model (patch encoders, MCEAM fusion, level heads, checkpoints)."""

from .config import EncoderConfig, ModelConfig, ModelConfigError, SCALE_ORDER
from .encoder import EncoderOutput, PatchEncoder, ShapeError
from .mceam import MCEAM, CrossAttentionBlock, CrossAttentionStack, RoiOnlyFusion
from .hslm import (
    DivergenceError,
    LabelRangeError,
    LevelHeads,
    classification_loss,
    hslm_forward,
    level_losses,
    total_loss,
)
from .network import MATANet, MATANetOutput, build_model
from .checkpoint import (
    Checkpoint,
    CheckpointError,
    export_encoder_weights,
    load_checkpoint,
    load_encoder_weights,
    save_checkpoint,
)

__all__ = [
    "EncoderConfig",
    "ModelConfig",
    "ModelConfigError",
    "SCALE_ORDER",
    "EncoderOutput",
    "PatchEncoder",
    "ShapeError",
    "MCEAM",
    "CrossAttentionBlock",
    "CrossAttentionStack",
    "RoiOnlyFusion",
    "DivergenceError",
    "LabelRangeError",
    "LevelHeads",
    "classification_loss",
    "hslm_forward",
    "level_losses",
    "total_loss",
    "MATANet",
    "MATANetOutput",
    "build_model",
    "Checkpoint",
    "CheckpointError",
    "export_encoder_weights",
    "load_checkpoint",
    "load_encoder_weights",
    "save_checkpoint",
]
