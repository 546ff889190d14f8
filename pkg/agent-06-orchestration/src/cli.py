"""
MATANet — Command Line

Subcommands:

    synth         --spec F --out DIR            generate the synthetic dataset
    train         --config F --data DIR --out DIR [--dump-crops DIR]
    eval          --ckpt F --data DIR --report out.json [--pred out.csv]
    hd            --tree taxonomy.json --pred out.csv
    export-embed  --ckpt F --data DIR --out emb.csv
    export-attn   --ckpt F --data DIR --ids 1,2 --out DIR
    ablate        --config F --data DIR --out DIR [--seeds 0,1,2]
    rerun         --manifest F --out DIR        replay a recorded run

``--data`` takes a dataset directory (``train.json``/``test.json``, as
written by ``synth``) or a single annotation file.

Every command logs JSON lines to stderr (and to ``events.jsonl`` in its run
directory) and writes a run manifest next to its outputs.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric divergence.
Anything else propagates with a traceback (exit 1).

Usage:
    python matanet.py synth --spec agent-04-synthetic-data/config/synth_defaults.yaml --out runs/synth
    python matanet.py train --config agent-05-training/config/train_synthetic.yaml \\
        --data runs/synth --out runs/m4 --epochs 2 --set encoder.depth=2
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

from agent_01_taxonomy.algorithms.hierarchical_distance import (
    accuracy,
    hierarchical_distance,
    read_predictions,
)
from agent_01_taxonomy.algorithms.tree import TaxonomyError, load_taxonomy
from agent_02_data_pipeline.src.dataset import Dataset, DatasetError, load_dataset
from agent_02_data_pipeline.src.roi_context import CropError
from agent_03_model.src.checkpoint import CheckpointError
from agent_03_model.src.config import ModelConfigError
from agent_03_model.src.hslm import DivergenceError
from agent_04_synthetic_data.src.generator import generate
from agent_05_training.src.ablation import SUMMARY_FILE, VARIANTS, run_ablation
from agent_05_training.src.evaluation import evaluate
from agent_05_training.src.exports import export_attention, export_embeddings
from agent_05_training.src.trainer import train

from .config import (
    ConfigError,
    dump_config,
    parse_set_args,
    resolve_synth_spec,
    resolve_train_config,
    train_overrides,
)
from .logging_setup import EVENTS_FILE, close_logging, configure_logging
from .manifest import MANIFEST_FILE, ManifestError, RunManifest

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGENCE = 4

CONFIG_ERRORS = (ConfigError, ModelConfigError)
DATA_ERRORS = (DatasetError, TaxonomyError, CropError, CheckpointError, ManifestError, FileNotFoundError)

RESOLVED_CONFIG_FILE = "resolved_config.yaml"


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def load_split(data: str | Path, split: str) -> Dataset:
    path = Path(data)
    if path.is_dir():
        path = path / f"{split}.json"
    return load_dataset(path)


def parse_ids(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError([f"ids: expected comma-separated integers, got {text!r}"], source="--ids") from None


def parse_seeds(text: str) -> list[int]:
    try:
        seeds = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError([f"seeds: expected comma-separated integers, got {text!r}"], source="--seeds") from None
    negative = [s for s in seeds if s < 0]
    if negative:
        raise ConfigError([f"seeds: must be non-negative, got {negative}"], source="--seeds")
    return seeds


def _train_flags(args: argparse.Namespace) -> dict[str, Any]:
    overrides = train_overrides(
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        seed=args.seed,
        scales=args.scales,
        hslm=args.hslm,
        set_args=args.set,
    )
    if args.dump_crops is not None:
        overrides["dump_crops"] = args.dump_crops
    return overrides


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace, manifest: RunManifest) -> None:
    overrides = parse_set_args(args.set)
    if args.seed is not None:
        overrides["seed"] = args.seed
    spec = resolve_synth_spec(args.spec, overrides)
    manifest.config = spec.model_dump(mode="json")
    manifest.seed = spec.seed
    result = generate(spec, args.out)
    manifest.add_artifact("train", result.train_file)
    manifest.add_artifact("test", result.test_file)
    manifest.add_artifact("taxonomy", result.taxonomy_file)
    manifest.add_artifact("dataset_manifest", result.manifest_file)


def cmd_train(args: argparse.Namespace, manifest: RunManifest) -> None:
    config = resolve_train_config(args.config, _train_flags(args))
    manifest.config = config.model_dump(mode="json")
    manifest.seed = config.seed
    out = Path(args.out)
    manifest.add_artifact("resolved_config", dump_config(config, out / RESOLVED_CONFIG_FILE))

    train_ds = load_split(args.data, "train")
    eval_ds = load_split(args.eval_data, "test") if args.eval_data else None
    result = train(config, train_ds, out, eval_ds=eval_ds, resume=args.resume)
    manifest.add_artifact("final_checkpoint", result.final_checkpoint)
    manifest.add_artifact("best_checkpoint", result.best_checkpoint)
    manifest.add_artifact("last_checkpoint", result.last_checkpoint)
    manifest.add_artifact("losses", out / "losses.json")
    if config.dump_crops:
        manifest.add_artifact("crops", config.dump_crops)


def cmd_eval(args: argparse.Namespace, manifest: RunManifest) -> None:
    ds = load_split(args.data, args.split)
    result = evaluate(args.ckpt, ds, pred_path=args.pred, batch_size=args.batch_size, device=args.device)
    manifest.add_artifact("report", result.report.write_json(args.report))
    if args.pred:
        manifest.add_artifact("predictions", args.pred)


def cmd_hd(args: argparse.Namespace, manifest: RunManifest) -> None:
    tree = load_taxonomy(args.tree)
    records = read_predictions(args.pred)
    for rec in records:
        for node in (rec.true_taxon_id, rec.predicted_taxon_id):
            if node not in tree:
                raise TaxonomyError(f"Prediction for annotation {rec.annotation_id} names unknown node {node}")
    summary = {
        "hierarchical_distance": hierarchical_distance(tree, records),
        "accuracy": accuracy(records),
        "n_samples": len(records),
    }
    logger.info("HD %.4f over %d predictions", summary["hierarchical_distance"], len(records), extra=summary)
    print(json.dumps(summary))
    if args.report:
        report = Path(args.report)
        report.parent.mkdir(parents=True, exist_ok=True)
        report.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
        manifest.add_artifact("report", report)


def cmd_export_embed(args: argparse.Namespace, manifest: RunManifest) -> None:
    ds = load_split(args.data, args.split)
    table = export_embeddings(args.ckpt, ds, args.out, batch_size=args.batch_size, device=args.device)
    logger.info("Exported %d embeddings of width %d", len(table), table.z.shape[1])
    manifest.add_artifact("embeddings", args.out)


def cmd_export_attn(args: argparse.Namespace, manifest: RunManifest) -> None:
    ds = load_split(args.data, args.split)
    ids = parse_ids(args.ids) if args.ids else list(ds.annotation_ids[: args.limit])
    written = export_attention(args.ckpt, ds, ids, args.out, batch_size=args.batch_size, device=args.device)
    for path in written:
        manifest.add_artifact(path.stem if path.suffix == ".png" else "attention_weights", path)


def cmd_ablate(args: argparse.Namespace, manifest: RunManifest) -> None:
    config = resolve_train_config(args.config, _train_flags(args))
    seeds = parse_seeds(args.seeds)
    manifest.config = config.model_dump(mode="json")
    manifest.seed = seeds[0] if seeds else config.seed
    out = Path(args.out)
    manifest.add_artifact("resolved_config", dump_config(config, out / RESOLVED_CONFIG_FILE))
    summary = run_ablation(
        config,
        load_split(args.data, "train"),
        load_split(args.data, "test"),
        out,
        seeds=seeds,
        variants=args.variants,
    )
    manifest.add_artifact("summary", out / SUMMARY_FILE)
    for name, variant in summary["variants"].items():
        for run in variant["runs"]:
            manifest.add_artifact(f"{name}/seed_{run['seed']}", run["run_dir"])


# Commands whose outputs live in one directory and which rerun can replay.
CONFIG_ARG = {"synth": "spec", "train": "config", "ablate": "config", "export-attn": None}
FLAG_ARGS = ("epochs", "batch_size", "lr", "seed", "scales", "hslm", "dump_crops")


def cmd_rerun(args: argparse.Namespace, manifest: RunManifest) -> None:
    prior = RunManifest.load(args.manifest)
    if prior.command not in CONFIG_ARG:
        raise ConfigError([f"command: {prior.command!r} cannot be replayed; expected one of {list(CONFIG_ARG)}"])
    inputs = dict(prior.inputs)
    out = Path(args.out)
    inputs["out"] = str(out)
    config_arg = CONFIG_ARG[prior.command]
    if config_arg is not None:
        if prior.config is None:
            raise ManifestError(f"{args.manifest}: no resolved config recorded")
        config_file = out / f"replayed_{config_arg}.json"
        config_file.parent.mkdir(parents=True, exist_ok=True)
        config_file.write_text(json.dumps(prior.config, indent=2) + "\n", encoding="utf-8")
        inputs[config_arg] = str(config_file)
        inputs["set"] = []
        for key in FLAG_ARGS:
            if key in inputs:
                inputs[key] = None
    replay = argparse.Namespace(**inputs)
    manifest.command = prior.command
    manifest.inputs = {**inputs, "replayed_from": str(args.manifest)}
    logger.info("Replaying %s run from %s into %s", prior.command, args.manifest, out)
    COMMANDS[prior.command](replay, manifest)


COMMANDS: dict[str, Callable[[argparse.Namespace, RunManifest], None]] = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "hd": cmd_hd,
    "export-embed": cmd_export_embed,
    "export-attn": cmd_export_attn,
    "ablate": cmd_ablate,
    "rerun": cmd_rerun,
}


# ---------------------------------------------------------------------------
# Run directories
# ---------------------------------------------------------------------------


def manifest_target(args: argparse.Namespace) -> tuple[Path | None, Path | None]:
    """(run directory for ``events.jsonl``, manifest path) of a command."""
    if args.command in ("synth", "train", "export-attn", "ablate", "rerun"):
        out = Path(args.out)
        return out, out / MANIFEST_FILE
    if args.command == "eval":
        report = Path(args.report)
        return report.parent, report.with_name(f"{report.stem}.{MANIFEST_FILE}")
    if args.command == "export-embed":
        target = Path(args.out)
        return target.parent, target.with_name(f"{target.stem}.{MANIFEST_FILE}")
    if args.command == "hd" and args.report:
        report = Path(args.report)
        return report.parent, report.with_name(f"{report.stem}.{MANIFEST_FILE}")
    return None, None


def recorded_inputs(args: argparse.Namespace) -> dict[str, Any]:
    skip = {"command", "log_level"}
    return {k: v for k, v in vars(args).items() if k not in skip}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging threshold",
    )

    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, default=None, help="Override the config seed")
    seeded.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Dotted config override")

    training = argparse.ArgumentParser(add_help=False)
    training.add_argument("--config", default=None, help="TrainConfig YAML/JSON (empty or absent: defaults)")
    training.add_argument("--epochs", type=int, default=None)
    training.add_argument("--batch-size", type=int, default=None)
    training.add_argument("--lr", type=float, default=None)
    training.add_argument("--scales", default=None, help="Comma-separated scale tokens, e.g. 3,5,full")
    training.add_argument("--hslm", choices=["off", "on", "random"], default=None)
    training.add_argument("--dump-crops", default=None, metavar="DIR", help="PNG crops of every ROI in the first epoch")

    inference = argparse.ArgumentParser(add_help=False)
    inference.add_argument("--ckpt", required=True, help="Checkpoint file")
    inference.add_argument("--data", required=True, help="Dataset directory or annotation file")
    inference.add_argument("--split", default="test", help="Split file to read when --data is a directory")
    inference.add_argument("--batch-size", type=int, default=64)
    inference.add_argument("--device", default="cpu")

    parser = argparse.ArgumentParser(
        prog="matanet",
        description="MATANet — context-fused, hierarchy-supervised fine-grained classification",
    )
    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    # synth
    synth = subparsers.add_parser("synth", parents=[common, seeded], help="Generate the synthetic dataset")
    synth.add_argument("--spec", default=None, help="SynthSpec YAML/JSON (empty or absent: defaults)")
    synth.add_argument("--out", required=True, help="Output dataset directory")

    # train
    train_p = subparsers.add_parser("train", parents=[common, seeded, training], help="Train a model")
    train_p.add_argument("--data", required=True, help="Dataset directory or train annotation file")
    train_p.add_argument("--eval-data", default=None, help="Held-out data scored every eval_every epochs")
    train_p.add_argument("--resume", default=None, help="Checkpoint to resume from")
    train_p.add_argument("--out", required=True, help="Run directory")

    # eval
    eval_p = subparsers.add_parser("eval", parents=[common, inference], help="Evaluate a checkpoint")
    eval_p.add_argument("--report", required=True, help="MetricsReport JSON output")
    eval_p.add_argument("--pred", default=None, help="Prediction CSV output")

    # hd
    hd = subparsers.add_parser("hd", parents=[common], help="Hierarchical distance of a prediction CSV")
    hd.add_argument("--tree", required=True, help="Taxonomy JSON")
    hd.add_argument("--pred", required=True, help="Prediction CSV")
    hd.add_argument("--report", default=None, help="Optional JSON output")

    # export-embed
    embed = subparsers.add_parser("export-embed", parents=[common, inference], help="Export fused embeddings")
    embed.add_argument("--out", required=True, help="Embedding CSV output")

    # export-attn
    attn = subparsers.add_parser("export-attn", parents=[common, inference], help="Export attention heatmaps")
    attn.add_argument("--ids", default=None, help="Comma-separated annotation ids")
    attn.add_argument("--limit", type=int, default=4, help="Without --ids: the first N annotations")
    attn.add_argument("--out", required=True, help="Output directory")

    # ablate
    ablate = subparsers.add_parser("ablate", parents=[common, seeded, training], help="Run the variant grid")
    ablate.add_argument("--data", required=True, help="Dataset directory with train.json and test.json")
    ablate.add_argument("--out", required=True, help="Output directory")
    ablate.add_argument("--seeds", default="0,1,2", help="Comma-separated seeds")
    ablate.add_argument("--variants", nargs="+", choices=list(VARIANTS), default=None)

    # rerun
    rerun = subparsers.add_parser("rerun", parents=[common], help="Replay a run from its manifest")
    rerun.add_argument("--manifest", required=True, help="run_manifest.json or its directory")
    rerun.add_argument("--out", required=True, help="Output directory for the replay")

    return parser


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return EXIT_CONFIG

    run_dir, manifest_path = manifest_target(args)
    configure_logging(args.log_level, run_dir)
    manifest = RunManifest(command=args.command, inputs=recorded_inputs(args))
    if run_dir is not None:
        manifest.add_artifact("events", run_dir / EVENTS_FILE)

    code = EXIT_OK
    error: str | None = None
    try:
        COMMANDS[args.command](args, manifest)
    except CONFIG_ERRORS as exc:
        code, error = EXIT_CONFIG, str(exc)
    except DATA_ERRORS as exc:
        code, error = EXIT_DATA, str(exc)
    except DivergenceError as exc:
        code, error = EXIT_DIVERGENCE, str(exc)
        logger.error("Training diverged", extra={"batch_ids": exc.batch_ids})
    except BaseException:
        close_logging()
        raise

    if error is not None:
        logger.error("%s failed: %s", args.command, error, extra={"exit_code": code})
    manifest.finish("ok" if code == EXIT_OK else "failed", error)
    if manifest_path is not None:
        manifest.write(manifest_path)
    close_logging()
    return code


if __name__ == "__main__":
    sys.exit(main())
