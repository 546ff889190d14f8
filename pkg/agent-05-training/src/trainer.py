"""
MATANet — Training Loop

Minimises L_total = L_cls + L_hier with AdamW at a constant learning rate:

    L_cls   cross-entropy of the terminal classifier
    L_hier  unweighted sum of the level-head cross-entropies (0 when hslm=off)

Every source of randomness is keyed by the config seed: parameter init,
per-epoch batch order (seed, epoch) and augmentation (seed, sample, epoch).
A run resumed from ``last.pt`` therefore replays the same step losses as an
uninterrupted run on the same platform.

Run directory layout:
    checkpoints/last.pt    after every epoch (resume point)
    checkpoints/best.pt    lowest eval HD, or lowest L_total without eval data
    checkpoints/final.pt   after the last epoch
    losses.json            per-epoch means and per-step values

With ``dump_crops`` set, the PNG streams of every ROI served in the first
epoch go to that directory.

Dependencies:
    pip install torch
"""

from __future__ import annotations

import json
import logging
import math
import shutil
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import torch

from agent_02_data_pipeline.src.dataset import Dataset
from agent_02_data_pipeline.src.roi_context import dump_context_set
from agent_03_model.src.checkpoint import (
    CheckpointError,
    load_checkpoint,
    load_encoder_weights,
    save_checkpoint,
)
from agent_03_model.src.hslm import classification_loss, hslm_forward, total_loss
from agent_03_model.src.network import MATANet, build_model

from .config import ADAMW_BETAS, ADAMW_EPS, TrainConfig
from .data import LabelSpaces, RoiDataset, build_label_spaces, model_inputs, train_loader
from .evaluation import evaluate_model

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EpochLosses:
    epoch: int
    l_cls: float
    l_hier: float
    l_total: float

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass
class TrainResult:
    out_dir: Path
    labels: LabelSpaces
    history: list[EpochLosses] = field(default_factory=list)
    step_losses: list[dict[str, Any]] = field(default_factory=list)
    last_checkpoint: Path | None = None
    best_checkpoint: Path | None = None
    final_checkpoint: Path | None = None

    @property
    def steps(self) -> int:
        return len(self.step_losses)


def make_optimizer(model: MATANet, config: TrainConfig) -> torch.optim.AdamW:
    params = [p for p in model.parameters() if p.requires_grad]
    return torch.optim.AdamW(
        params,
        lr=config.lr,
        betas=ADAMW_BETAS,
        eps=ADAMW_EPS,
        weight_decay=config.weight_decay,
    )


def _epoch_means(epoch: int, steps: list[dict[str, Any]]) -> EpochLosses:
    n = sum(s["batch_size"] for s in steps)
    mean = {key: sum(s[key] * s["batch_size"] for s in steps) / n for key in ("l_cls", "l_hier", "l_total")}
    return EpochLosses(epoch=epoch, **mean)


class Trainer:
    """One training run.  ``run()`` may be called on a fresh run or after
    ``resume()`` has restored a ``last.pt`` checkpoint."""

    def __init__(self, config: TrainConfig, train_ds: Dataset, out_dir: str | Path, eval_ds: Dataset | None = None):
        self.config = config
        self.train_ds = train_ds
        self.eval_ds = eval_ds
        self.out_dir = Path(out_dir)
        self.device = torch.device(config.device)
        self.labels = build_label_spaces(
            train_ds.tree,
            train_ds.terminals(),
            hslm=config.hslm,
            include_terminal_rank=config.hslm_include_terminal_rank,
            seed=config.seed,
        )
        self.model_config = config.build_model_config(len(self.labels.terminal), self.labels.level_sizes)
        self.model = build_model(self.model_config, seed=config.seed)
        if config.encoder.weights:
            load_encoder_weights(self.model, config.encoder.weights)
        self.model.to(self.device)
        self.optimizer = make_optimizer(self.model, config)
        self.items = RoiDataset(
            train_ds,
            config.scales,
            config.crop_side,
            labels=self.labels,
            augmentation=config.augmentation.to_augment_config(),
            seed=config.seed,
        )
        self.loader = train_loader(self.items, config.batch_size, config.seed, config.num_workers)

        self.start_epoch = 0
        self.history: list[EpochLosses] = []
        self.step_losses: list[dict[str, Any]] = []
        self.best_score = math.inf
        self.best_epoch: int | None = None

    # -- paths --------------------------------------------------------------

    @property
    def checkpoint_dir(self) -> Path:
        return self.out_dir / "checkpoints"

    def checkpoint_path(self, name: str) -> Path:
        return self.checkpoint_dir / f"{name}.pt"

    # -- state --------------------------------------------------------------

    def train_state(self, epochs_done: int) -> dict[str, Any]:
        return {
            "epoch": epochs_done,
            "history": [h.to_dict() for h in self.history],
            "step_losses": list(self.step_losses),
            "best_score": self.best_score,
            "best_epoch": self.best_epoch,
        }

    def save(self, name: str, epochs_done: int) -> Path:
        return save_checkpoint(
            self.checkpoint_path(name),
            self.model,
            self.labels.terminal.node_ids,
            self.labels.level_ids,
            optimizer=self.optimizer,
            train_state=self.train_state(epochs_done),
            train_config=self.config.model_dump(mode="json"),
            taxonomy=self.train_ds.tree.to_records(),
        )

    def resume(self, path: str | Path) -> None:
        ckpt = load_checkpoint(path)
        if ckpt.model_config != self.model_config:
            raise CheckpointError(f"{path}: model shape differs from the configured run")
        if tuple(ckpt.terminal_ids) != self.labels.terminal.node_ids:
            raise CheckpointError(f"{path}: terminal label space differs from the training data")
        if ckpt.optimizer_state is None:
            raise CheckpointError(f"{path}: no optimizer state to resume from")
        self.model.load_state_dict(ckpt.state_dict)
        self.optimizer.load_state_dict(ckpt.optimizer_state)
        if ckpt.rng_state is not None:
            torch.set_rng_state(ckpt.rng_state)
        state = ckpt.train_state
        self.start_epoch = int(state.get("epoch", 0))
        self.history = [EpochLosses(**row) for row in state.get("history", [])]
        self.step_losses = list(state.get("step_losses", []))
        self.best_score = float(state.get("best_score", math.inf))
        self.best_epoch = state.get("best_epoch")
        logger.info("Resumed from %s at epoch %d", path, self.start_epoch)

    # -- loop ---------------------------------------------------------------

    def train_step(self, batch: dict[str, Any], epoch: int) -> dict[str, Any]:
        batch_ids = batch["annotation_id"].tolist()
        roi, contexts = model_inputs(batch, self.config.scales, self.device)
        out = self.model(roi, contexts)
        l_cls = classification_loss(out.logits, batch["terminal"].to(self.device))
        level_targets = {rank: t.to(self.device) for rank, t in batch["levels"].items()}
        l_hier, _ = hslm_forward(out.z, level_targets, self.model.level_heads)
        l_total = total_loss(l_cls, l_hier, batch_ids)

        self.optimizer.zero_grad(set_to_none=True)
        l_total.backward()
        self.optimizer.step()
        return {
            "step": len(self.step_losses) + 1,
            "epoch": epoch,
            "batch_size": len(batch_ids),
            "l_cls": float(l_cls.detach()),
            "l_hier": float(l_hier.detach()),
            "l_total": float(l_total.detach()),
        }

    def dump_epoch_crops(self, crop_dir: str | Path) -> int:
        """Write the four augmented streams of every ROI in the order the
        first epoch serves them."""
        self.items.set_epoch(self.start_epoch)
        self.loader.batch_sampler.set_epoch(self.start_epoch)
        count = 0
        for batch in self.loader.batch_sampler:
            for annotation_id in batch:
                dump_context_set(self.items.context_set(annotation_id), crop_dir, annotation_id)
                count += 1
        logger.info("Dumped crops of %d ROIs to %s", count, crop_dir, extra={"epoch": self.start_epoch})
        return count

    def score(self, epoch: int, losses: EpochLosses) -> float | None:
        """Selection score of this epoch (lower is better), or None when not scored."""
        every = self.config.eval_every
        if self.eval_ds is None or every == 0:
            return losses.l_total
        if (epoch + 1) % every:
            return None
        result = evaluate_model(
            self.model,
            self.labels.terminal.node_ids,
            self.eval_ds,
            batch_size=self.config.eval_batch_size,
            device=self.device,
        )
        return result.report.hierarchical_distance

    def run(self, stop_after_epoch: int | None = None) -> TrainResult:
        """Train up to ``config.epochs`` (or up to ``stop_after_epoch``, which
        leaves a resumable run without a final checkpoint)."""
        if self.config.dump_crops:
            self.dump_epoch_crops(self.config.dump_crops)
        end = self.config.epochs if stop_after_epoch is None else min(stop_after_epoch, self.config.epochs)
        for epoch in range(self.start_epoch, end):
            self.items.set_epoch(epoch)
            self.loader.batch_sampler.set_epoch(epoch)
            self.model.train()
            steps = [self.train_step(batch, epoch) for batch in self.loader]
            self.step_losses.extend(steps)
            losses = _epoch_means(epoch, steps)
            self.history.append(losses)
            logger.info(
                "epoch %d: l_cls=%.6f l_hier=%.6f l_total=%.6f",
                epoch,
                losses.l_cls,
                losses.l_hier,
                losses.l_total,
                extra=losses.to_dict(),
            )

            score = self.score(epoch, losses)
            if score is not None and score < self.best_score:
                self.best_score, self.best_epoch = score, epoch
                self.save("best", epoch + 1)
            self.save("last", epoch + 1)

        result = TrainResult(
            out_dir=self.out_dir,
            labels=self.labels,
            history=list(self.history),
            step_losses=list(self.step_losses),
        )
        if end == self.config.epochs:
            result.final_checkpoint = self.save("final", self.config.epochs)
            if not self.checkpoint_path("best").exists():
                shutil.copyfile(result.final_checkpoint, self.checkpoint_path("best"))
        for name in ("last", "best"):
            if self.checkpoint_path(name).exists():
                setattr(result, f"{name}_checkpoint", self.checkpoint_path(name))
        self.write_losses()
        return result

    def write_losses(self) -> Path:
        path = self.out_dir / "losses.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {"epochs": [h.to_dict() for h in self.history], "steps": self.step_losses}
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        logger.info("Wrote loss curves %s", path)
        return path


def train(
    config: TrainConfig,
    train_ds: Dataset,
    out_dir: str | Path,
    eval_ds: Dataset | None = None,
    resume: str | Path | None = None,
    stop_after_epoch: int | None = None,
) -> TrainResult:
    trainer = Trainer(config, train_ds, out_dir, eval_ds)
    if resume is not None:
        trainer.resume(resume)
    return trainer.run(stop_after_epoch=stop_after_epoch)
