"""Generator parameters for the synthetic taxonomy scenes."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator

DEFAULTS_PATH = Path(__file__).resolve().parent.parent / "config" / "synth_defaults.yaml"


class SynthSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(0, ge=0, description="Master seed; every sample draws from (seed, split, index)")
    depth: int = Field(3, ge=2, description="Taxonomy depth L (ranks below the root)")
    branching: tuple[int, ...] = Field(
        (3, 2, 2),
        description="Children per node at each rank; the product is the terminal count",
    )
    image_side: int = Field(192, ge=32, description="Square scene side in pixels")
    roi_side_min: int = Field(16, ge=4, description="Smallest ROI side in pixels")
    roi_side_max: int = Field(28, ge=4, description="Largest ROI side in pixels")
    train_samples: int = Field(2000, ge=1, description="Scenes in the train split")
    test_samples: int = Field(500, ge=1, description="Scenes in the test split")
    alpha: float = Field(
        0.8,
        ge=0.0,
        le=1.0,
        description="Probability that the ROI glyph's distinguishing mark is omitted",
    )
    truncate_fraction: float = Field(
        0.0,
        ge=0.0,
        le=1.0,
        description="Fraction of train labels relabelled to a random proper ancestor",
    )
    companions_min: int = Field(3, ge=0, description="Fewest context glyphs per scene")
    companions_max: int = Field(6, ge=0, description="Most context glyphs per scene")

    @model_validator(mode="after")
    def _check_shape(self) -> "SynthSpec":
        if len(self.branching) != self.depth:
            raise ValueError(f"branching has {len(self.branching)} entries but depth is {self.depth}")
        if any(b < 1 for b in self.branching):
            raise ValueError(f"branching factors must be >= 1, got {list(self.branching)}")
        if math.prod(self.branching) < 2:
            raise ValueError("branching product must be >= 2")
        if self.roi_side_min > self.roi_side_max:
            raise ValueError("roi_side_min exceeds roi_side_max")
        if self.roi_side_max * 2 > self.image_side:
            raise ValueError("roi_side_max must be at most half the image side")
        if self.companions_min > self.companions_max:
            raise ValueError("companions_min exceeds companions_max")
        return self

    @property
    def n_terminals(self) -> int:
        return math.prod(self.branching)

    @classmethod
    def from_yaml(cls, path: str | Path) -> "SynthSpec":
        with open(path, "r", encoding="utf-8") as f:
            raw: Any = yaml.safe_load(f)
        return cls(**(raw or {}))
