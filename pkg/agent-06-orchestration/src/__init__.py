"""MATANet — Orchestration (config resolution, logging, run manifests, CLI)."""

__version__ = "0.1.0"

from .config import ConfigError, resolve_config, resolve_synth_spec, resolve_train_config  # noqa: E402
from .logging_setup import JsonLinesFormatter, configure_logging  # noqa: E402
from .manifest import RunManifest  # noqa: E402

__all__ = [
    "__version__",
    "ConfigError",
    "resolve_config",
    "resolve_synth_spec",
    "resolve_train_config",
    "JsonLinesFormatter",
    "configure_logging",
    "RunManifest",
]
