"""
MATANet — Configuration Resolution

Builds a validated ``TrainConfig`` or ``SynthSpec`` from a YAML/JSON file
plus command-line overrides.  Overrides are dotted key paths
(``encoder.depth=2``) whose values are parsed as YAML scalars, merged into
the raw file mapping, and validated once, so the file and the command line
go through the same checks.  Precedence: pydantic defaults < file <
overrides.

Every validation failure is reported as ``ConfigError`` with one line per
problem, each naming the dotted key path it belongs to.

Usage:
    cfg = resolve_config("cfg.yaml", {"epochs": 2, "encoder.depth": 2})
    spec = resolve_config("spec.json", parse_set_args(["alpha=0.5"]), model=SynthSpec)

Dependencies:
    pip install pydantic PyYAML
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Iterable, Mapping, TypeVar

import yaml
from pydantic import BaseModel, ValidationError

from agent_04_synthetic_data.src.spec import SynthSpec
from agent_05_training.src.config import TrainConfig

logger = logging.getLogger(__name__)

ConfigModel = TypeVar("ConfigModel", bound=BaseModel)

ROOT_KEY = "(root)"


class ConfigError(ValueError):
    """Unknown key, type mismatch or constraint violation in a run config."""

    def __init__(self, problems: list[str], source: str = "config"):
        self.problems = problems
        self.source = source
        super().__init__(f"Invalid {source}:\n  " + "\n  ".join(problems))


def key_path(loc: Iterable[Any]) -> str:
    return ".".join(str(part) for part in loc) or ROOT_KEY


def validation_problems(exc: ValidationError) -> list[str]:
    problems = []
    for err in exc.errors():
        message = err["msg"]
        if err["type"] == "extra_forbidden":
            message = "unknown key"
        problems.append(f"{key_path(err['loc'])}: {message}")
    return problems


# ---------------------------------------------------------------------------
# Raw mappings
# ---------------------------------------------------------------------------


def load_raw(path: str | Path | None) -> dict[str, Any]:
    """Parse a config file into a plain mapping.  ``None`` or an empty file
    gives ``{}``.  A missing file raises ``FileNotFoundError``."""
    if path is None:
        return {}
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except yaml.YAMLError as exc:
        raise ConfigError([f"{ROOT_KEY}: does not parse ({exc})"], source=str(path)) from None
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError([f"{ROOT_KEY}: expected a mapping, got {type(raw).__name__}"], source=str(path))
    return raw


def parse_set_args(items: Iterable[str]) -> dict[str, Any]:
    """``["a.b=1", "c=[3, 5]"]`` -> ``{"a.b": 1, "c": [3, 5]}``."""
    overrides: dict[str, Any] = {}
    for item in items:
        key, sep, text = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError([f"{item!r}: expected dotted.key=value"], source="--set")
        try:
            overrides[key] = yaml.safe_load(text) if text.strip() else None
        except yaml.YAMLError as exc:
            raise ConfigError([f"{key}: value does not parse ({exc})"], source="--set") from None
    return overrides


def apply_overrides(raw: Mapping[str, Any], overrides: Mapping[str, Any]) -> dict[str, Any]:
    merged: dict[str, Any] = _copy_tree(raw)
    for dotted, value in overrides.items():
        parts = dotted.split(".")
        node = merged
        for depth, part in enumerate(parts[:-1]):
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                prefix = ".".join(parts[: depth + 1])
                raise ConfigError([f"{dotted}: {prefix} is not a section"], source="overrides")
            node = child
        node[parts[-1]] = value
    return merged


def _copy_tree(raw: Mapping[str, Any]) -> dict[str, Any]:
    return {k: _copy_tree(v) if isinstance(v, Mapping) else v for k, v in raw.items()}


# ---------------------------------------------------------------------------
# Resolution
# ---------------------------------------------------------------------------


def resolve_config(
    path: str | Path | None,
    overrides: Mapping[str, Any] | None = None,
    model: type[ConfigModel] = TrainConfig,
) -> ConfigModel:
    raw = apply_overrides(load_raw(path), overrides or {})
    try:
        config = model(**raw)
    except ValidationError as exc:
        raise ConfigError(validation_problems(exc), source=f"{model.__name__} ({path or 'defaults'})") from None
    logger.info(
        "Resolved %s from %s with %d override(s)",
        model.__name__,
        path or "defaults",
        len(overrides or {}),
    )
    return config


def train_overrides(
    epochs: int | None = None,
    batch_size: int | None = None,
    lr: float | None = None,
    seed: int | None = None,
    scales: str | None = None,
    hslm: str | None = None,
    set_args: Iterable[str] = (),
) -> dict[str, Any]:
    """Collect the dedicated training flags and ``--set`` items into one
    override mapping.  ``--set`` entries are applied last."""
    overrides: dict[str, Any] = {}
    if epochs is not None:
        overrides["epochs"] = epochs
    if batch_size is not None:
        overrides["batch_size"] = batch_size
    if lr is not None:
        overrides["lr"] = lr
    if seed is not None:
        overrides["seed"] = seed
    if scales is not None:
        overrides["scale_set"] = [s.strip() for s in scales.split(",") if s.strip()]
    if hslm is not None:
        overrides["hslm"] = hslm
    overrides.update(parse_set_args(set_args))
    return overrides


def resolve_train_config(path: str | Path | None, overrides: Mapping[str, Any] | None = None) -> TrainConfig:
    return resolve_config(path, overrides, model=TrainConfig)


def resolve_synth_spec(path: str | Path | None, overrides: Mapping[str, Any] | None = None) -> SynthSpec:
    return resolve_config(path, overrides, model=SynthSpec)


def dump_config(config: BaseModel, path: str | Path) -> Path:
    """Write the fully resolved config; reading it back with
    ``resolve_config`` reproduces ``config``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(config.model_dump(mode="json"), f, sort_keys=False)
    return path
