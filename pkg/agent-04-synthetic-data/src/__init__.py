"""MATANet — Synthetic Data (taxonomy scenes, label truncation, ROI probe)."""

from .spec import SynthSpec
from .generator import GenerationResult, build_synthetic_taxonomy, generate, render_scene, terminal_style
from .truncation import truncate_labels
from .probe import ProbeResult, nearest_neighbor_probe

__all__ = [
    "SynthSpec",
    "GenerationResult",
    "build_synthetic_taxonomy",
    "generate",
    "render_scene",
    "terminal_style",
    "truncate_labels",
    "ProbeResult",
    "nearest_neighbor_probe",
]
