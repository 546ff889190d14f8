"""
MATANet — Training Configuration

``TrainConfig`` is the single typed view of a training run.  Files are read
with ``yaml.safe_load`` (JSON is valid YAML), unknown keys are rejected, and
every field carries its documented default so an empty file is a complete
configuration.

Optimizer moments and epsilon are not configurable: AdamW runs with
betas (0.9, 0.999) and eps 1e-8 at a constant learning rate.

Usage:
    cfg = TrainConfig.from_yaml("agent-05-training/config/train_synthetic.yaml")
    model_cfg = cfg.build_model_config(num_classes=12, level_sizes={1: 3, 2: 6})

Dependencies:
    pip install pydantic PyYAML
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Literal, Mapping

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from agent_02_data_pipeline.src.augment import AugmentConfig
from agent_02_data_pipeline.src.roi_context import CropError, canonical_scales
from agent_03_model.src.config import EncoderConfig, ModelConfig

CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"
DEFAULTS_PATH = CONFIG_DIR / "train_defaults.yaml"
SYNTHETIC_PATH = CONFIG_DIR / "train_synthetic.yaml"

ADAMW_BETAS = (0.9, 0.999)
ADAMW_EPS = 1e-8

HslmMode = Literal["off", "on", "random"]


class EncoderSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    image_side: int = Field(256, ge=8, description="Crop side fed to every encoder")
    patch_size: int = Field(16, ge=1, description="Patch side; must divide image_side")
    embed_dim: int = Field(64, ge=4, description="Token width D")
    depth: int = Field(4, ge=1, description="Transformer blocks per encoder")
    heads: int = Field(4, ge=1, description="Self-attention heads")
    shared_context_encoder: bool = Field(True, description="One context encoder for all scales")
    freeze: bool = Field(False, description="Stop gradients into the encoders")
    weights: str | None = Field(None, description="Optional exported encoder weights to start from")

    @model_validator(mode="after")
    def _check_shape(self) -> "EncoderSettings":
        if self.image_side % self.patch_size:
            raise ValueError(f"patch_size {self.patch_size} does not divide image_side {self.image_side}")
        if self.embed_dim % self.heads:
            raise ValueError(f"embed_dim {self.embed_dim} is not divisible by heads {self.heads}")
        return self

    def to_encoder_config(self) -> EncoderConfig:
        return EncoderConfig(**self.model_dump(exclude={"weights"}))


class AugmentSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    enabled: bool = Field(True, description="Apply train-time augmentation")
    p_hflip: float = Field(0.5, ge=0.0, le=1.0, description="Horizontal flip probability")
    p_vflip: float = Field(0.5, ge=0.0, le=1.0, description="Vertical flip probability")
    p_rotate: float = Field(0.5, ge=0.0, le=1.0, description="Right-angle rotation probability")
    p_jitter: float = Field(0.5, ge=0.0, le=1.0, description="Colour jitter probability")
    jitter_low: float = Field(0.8, gt=0.0, description="Smallest jitter factor")
    jitter_high: float = Field(1.25, gt=0.0, description="Largest jitter factor")
    consistent: bool = Field(True, description="Share one draw across ROI and context streams")

    @model_validator(mode="after")
    def _check_range(self) -> "AugmentSettings":
        if self.jitter_low > self.jitter_high:
            raise ValueError("jitter_low exceeds jitter_high")
        return self

    def to_augment_config(self) -> AugmentConfig:
        if not self.enabled:
            return AugmentConfig.disabled()
        return AugmentConfig(**self.model_dump(exclude={"enabled"}))


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(30, ge=1, description="Passes over the training set")
    batch_size: int = Field(32, ge=1, description="ROIs per optimizer step")
    lr: float = Field(3e-4, gt=0.0, description="Constant AdamW learning rate")
    weight_decay: float = Field(0.01, ge=0.0, description="AdamW decoupled weight decay")
    seed: int = Field(0, ge=0, description="Master seed: init, batch order, augmentation, label shuffle")
    scale_set: list[str] = Field(
        default_factory=lambda: ["3", "5", "full"],
        description="Context scales, a subset of 3, 5, full",
    )
    roi_only: bool = Field(False, description="ROI-only baseline: no context streams")
    hslm: HslmMode = Field("on", description="Level supervision: off, on, or random (shuffled control)")
    hslm_include_terminal_rank: bool = Field(False, description="Also supervise the terminal rank L")
    fusion_blocks: int = Field(4, ge=1, description="Cross-attention blocks per scale")
    fusion_heads: int = Field(4, ge=1, description="Cross-attention heads")
    encoder: EncoderSettings = Field(default_factory=EncoderSettings)
    augmentation: AugmentSettings = Field(default_factory=AugmentSettings)
    eval_every: int = Field(1, ge=0, description="Evaluate on the eval split every N epochs (0 disables)")
    eval_batch_size: int = Field(64, ge=1, description="ROIs per inference batch")
    num_workers: int = Field(0, ge=0, description="DataLoader worker processes")
    device: str = Field("cpu", description="torch device for training and inference")
    dump_crops: str | None = Field(None, description="Directory for PNG crops of every ROI served in the first epoch")

    @field_validator("scale_set", mode="before")
    @classmethod
    def _normalize_scales(cls, value: Any) -> list[str]:
        if isinstance(value, (str, int)):
            value = [value]
        try:
            return list(canonical_scales(value))
        except CropError as exc:
            raise ValueError(str(exc)) from None

    @model_validator(mode="after")
    def _check_scales(self) -> "TrainConfig":
        if self.roi_only and self.scale_set:
            raise ValueError("scale_set must be empty when roi_only is set")
        if not self.roi_only and not self.scale_set:
            raise ValueError("scale_set is empty; set roi_only for the ROI-only baseline")
        if self.encoder.embed_dim % self.fusion_heads:
            raise ValueError(
                f"encoder.embed_dim {self.encoder.embed_dim} is not divisible by fusion_heads {self.fusion_heads}"
            )
        return self

    # -- derived ------------------------------------------------------------

    @property
    def scales(self) -> tuple[str, ...]:
        return tuple(self.scale_set)

    @property
    def crop_side(self) -> int:
        return self.encoder.image_side

    def build_model_config(self, num_classes: int, level_sizes: Mapping[int, int]) -> ModelConfig:
        return ModelConfig(
            num_classes=num_classes,
            encoder=self.encoder.to_encoder_config(),
            scales=self.scales,
            roi_only=self.roi_only,
            level_sizes=dict(level_sizes),
            fusion_blocks=self.fusion_blocks,
            fusion_heads=self.fusion_heads,
        )

    @classmethod
    def from_yaml(cls, path: str | Path) -> "TrainConfig":
        with open(path, "r", encoding="utf-8") as f:
            raw: Any = yaml.safe_load(f)
        return cls(**(raw or {}))
