"""
MATANet — Ablation Runner

Trains and evaluates the context/hierarchy variant grid over a list of
seeds on one train/test pair:

    roi_only                     Proj(g), no context, no level heads
    mceam_3                      MCEAM over the 3x context
    mceam_3_5                    MCEAM over 3x and 5x
    mceam_3_5_full               MCEAM over 3x, 5x and the full image
    mceam_3_5_full_hslm          + level heads
    mceam_3_5_full_hslm_random   + level heads on shuffled targets (control)

Each run lives in ``<out>/<variant>/seed_<k>/`` (checkpoints, losses,
predictions.csv, report.json); ``<out>/ablation_summary.json`` collects the
per-run numbers with per-variant mean and standard deviation.

Dependencies:
    pip install numpy
"""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from agent_02_data_pipeline.src.dataset import Dataset

from .config import TrainConfig
from .consistency import hierarchy_consistency_stat
from .evaluation import evaluate
from .exports import export_embeddings
from .trainer import train

logger = logging.getLogger(__name__)

SUMMARY_FILE = "ablation_summary.json"
FULL = ["3", "5", "full"]

VARIANTS: dict[str, dict[str, Any]] = {
    "roi_only": {"roi_only": True, "scale_set": [], "hslm": "off"},
    "mceam_3": {"scale_set": ["3"], "hslm": "off"},
    "mceam_3_5": {"scale_set": ["3", "5"], "hslm": "off"},
    "mceam_3_5_full": {"scale_set": FULL, "hslm": "off"},
    "mceam_3_5_full_hslm": {"scale_set": FULL, "hslm": "on"},
    "mceam_3_5_full_hslm_random": {"scale_set": FULL, "hslm": "random"},
}

METRICS = ("accuracy", "hierarchical_distance", "intra_inter_ratio", "rank_correlation")


def variant_config(base: TrainConfig, variant: str, seed: int) -> TrainConfig:
    if variant not in VARIANTS:
        raise KeyError(f"Unknown ablation variant {variant!r}; expected one of {list(VARIANTS)}")
    overrides = {"roi_only": False, **VARIANTS[variant], "seed": seed}
    if base.dump_crops:
        overrides["dump_crops"] = str(Path(base.dump_crops) / variant / f"seed_{seed}")
    return TrainConfig(**{**base.model_dump(), **overrides})


def run_variant(
    base: TrainConfig, variant: str, seed: int, train_ds: Dataset, test_ds: Dataset, out_dir: Path
) -> dict[str, Any]:
    config = variant_config(base, variant, seed)
    run_dir = out_dir / variant / f"seed_{seed}"
    logger.info("Ablation run %s seed %d -> %s", variant, seed, run_dir)
    result = train(config, train_ds, run_dir)
    evaluation = evaluate(
        result.final_checkpoint,
        test_ds,
        pred_path=run_dir / "predictions.csv",
        batch_size=config.eval_batch_size,
        device=config.device,
    )
    evaluation.report.write_json(run_dir / "report.json")
    table = export_embeddings(result.final_checkpoint, test_ds, batch_size=config.eval_batch_size, device=config.device)
    stats = hierarchy_consistency_stat(table.z, table.taxon_ids, test_ds.tree, seed=seed)
    return {
        "seed": seed,
        "accuracy": evaluation.report.accuracy,
        "hierarchical_distance": evaluation.report.hierarchical_distance,
        "per_level_accuracy": list(evaluation.report.per_level_accuracy),
        "intra_inter_ratio": stats.intra_inter_ratio,
        "rank_correlation": stats.rank_correlation,
        "run_dir": str(run_dir),
    }


def summarize(runs: Sequence[Mapping[str, Any]]) -> dict[str, dict[str, float]]:
    mean, std = {}, {}
    for key in METRICS:
        values = np.asarray([run[key] for run in runs], dtype=np.float64)
        mean[key] = float(values.mean())
        std[key] = float(values.std())
    return {"mean": mean, "std": std}


def write_summary(summary: Mapping[str, Any], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    os.replace(tmp, path)
    logger.info("Wrote ablation summary %s", path)
    return path


def run_ablation(
    base: TrainConfig,
    train_ds: Dataset,
    test_ds: Dataset,
    out_dir: str | Path,
    seeds: Iterable[int] = (0, 1, 2),
    variants: Iterable[str] | None = None,
) -> dict[str, Any]:
    out_dir = Path(out_dir)
    seeds = [int(s) for s in seeds]
    names = list(variants) if variants is not None else list(VARIANTS)
    for name in names:
        if name not in VARIANTS:
            raise KeyError(f"Unknown ablation variant {name!r}; expected one of {list(VARIANTS)}")

    summary: dict[str, Any] = {"seeds": seeds, "variants": {}}
    for name in names:
        runs = [run_variant(base, name, seed, train_ds, test_ds, out_dir) for seed in seeds]
        summary["variants"][name] = {"overrides": VARIANTS[name], "runs": runs, **summarize(runs)}
        logger.info(
            "Variant %s: HD %.4f +- %.4f, accuracy %.4f",
            name,
            summary["variants"][name]["mean"]["hierarchical_distance"],
            summary["variants"][name]["std"]["hierarchical_distance"],
            summary["variants"][name]["mean"]["accuracy"],
        )
    write_summary(summary, out_dir / SUMMARY_FILE)
    return summary
