"""
MATANet — Model Configuration

Frozen dataclasses describing the network's shape.  They are validated on
construction, serialise to plain dicts for checkpoints, and carry nothing
that depends on torch.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Mapping

SCALE_ORDER: tuple[str, ...] = ("3", "5", "full")


class ModelConfigError(ValueError):
    """Inconsistent model or encoder configuration."""


@dataclass(frozen=True)
class EncoderConfig:
    image_side: int = 256
    patch_size: int = 16
    embed_dim: int = 64
    depth: int = 4
    heads: int = 4
    shared_context_encoder: bool = True
    freeze: bool = False

    def __post_init__(self) -> None:
        if self.image_side <= 0 or self.patch_size <= 0:
            raise ModelConfigError("image_side and patch_size must be positive")
        if self.image_side % self.patch_size:
            raise ModelConfigError(
                f"image_side {self.image_side} is not divisible by patch_size {self.patch_size}"
            )
        if self.embed_dim <= 0 or self.heads <= 0 or self.embed_dim % self.heads:
            raise ModelConfigError(f"embed_dim {self.embed_dim} is not divisible by heads {self.heads}")
        if self.depth < 1:
            raise ModelConfigError(f"Encoder depth must be >= 1, got {self.depth}")

    @property
    def n_patches(self) -> int:
        return (self.image_side // self.patch_size) ** 2

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class ModelConfig:
    """
    Full network shape.

    ``level_sizes`` maps each supervised rank to its head's class count;
    an empty mapping disables the level heads.  ``roi_only`` builds the
    baseline whose fused embedding is Proj(g) and requires ``scales`` to
    be empty.
    """

    num_classes: int
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    scales: tuple[str, ...] = SCALE_ORDER
    roi_only: bool = False
    level_sizes: Mapping[int, int] = field(default_factory=dict)
    fusion_blocks: int = 4
    fusion_heads: int = 4

    def __post_init__(self) -> None:
        if self.num_classes < 1:
            raise ModelConfigError(f"num_classes must be >= 1, got {self.num_classes}")
        unknown = [s for s in self.scales if s not in SCALE_ORDER]
        if unknown:
            raise ModelConfigError(f"Unsupported context scale(s) {unknown}; expected a subset of {list(SCALE_ORDER)}")
        ordered = tuple(s for s in SCALE_ORDER if s in self.scales)
        if ordered != tuple(self.scales):
            raise ModelConfigError(f"scales must be distinct and ordered as {list(SCALE_ORDER)}, got {list(self.scales)}")
        if self.roi_only and self.scales:
            raise ModelConfigError("roi_only model must not declare context scales")
        if not self.roi_only and not self.scales:
            raise ModelConfigError("Context scale set is empty; use roi_only for the ROI-only baseline")
        if self.fusion_blocks < 1:
            raise ModelConfigError(f"fusion_blocks must be >= 1, got {self.fusion_blocks}")
        if self.encoder.embed_dim % self.fusion_heads:
            raise ModelConfigError(
                f"embed_dim {self.encoder.embed_dim} is not divisible by fusion_heads {self.fusion_heads}"
            )
        for rank, size in self.level_sizes.items():
            if rank < 1 or size < 1:
                raise ModelConfigError(f"Invalid level head (rank {rank}, size {size})")

    @property
    def embed_dim(self) -> int:
        return self.encoder.embed_dim

    @property
    def fused_dim(self) -> int:
        return self.encoder.embed_dim

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(sorted(self.level_sizes))

    def to_dict(self) -> dict[str, Any]:
        return {
            "num_classes": self.num_classes,
            "encoder": self.encoder.to_dict(),
            "scales": list(self.scales),
            "roi_only": self.roi_only,
            "level_sizes": {str(rank): size for rank, size in sorted(self.level_sizes.items())},
            "fusion_blocks": self.fusion_blocks,
            "fusion_heads": self.fusion_heads,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ModelConfig":
        try:
            return cls(
                num_classes=int(data["num_classes"]),
                encoder=EncoderConfig(**data.get("encoder", {})),
                scales=tuple(str(s) for s in data.get("scales", SCALE_ORDER)),
                roi_only=bool(data.get("roi_only", False)),
                level_sizes={int(r): int(s) for r, s in data.get("level_sizes", {}).items()},
                fusion_blocks=int(data.get("fusion_blocks", 4)),
                fusion_heads=int(data.get("fusion_heads", 4)),
            )
        except (KeyError, TypeError) as exc:
            raise ModelConfigError(f"Malformed model config: {exc}") from None
