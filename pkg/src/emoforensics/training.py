"""Deterministic mini-batch training for the detector.

AdamW with decoupled weight decay, reduce-on-plateau learning rate halving,
early stopping on validation loss, best-checkpoint restore. Every random
choice in a run (parameter init, batch order, dropout masks, negative-pair
draws) is consumed from one generator seeded by ``TrainConfig.seed``, so two
runs with the same config produce bit-identical parameters.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from emoforensics.embeddings import downsample_array, read_embedding_file
from emoforensics.losses import (
    bce_with_logits,
    build_contrastive_pairs,
    combined_loss,
    pair_loss,
)
from emoforensics.manifest import DatasetManifest
from emoforensics.model import EmoForensicsModel, ModelConfig

# offset applied to the run seed for the per-epoch validation pair draws,
# keeping validation loss comparable across epochs
_VAL_SEED_OFFSET = 1_000_003


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    weight_decay: float = 0.05
    optimizer_epsilon: float = 1e-8
    max_epochs: int = 100
    scheduler_patience: int = 4
    scheduler_factor: float = 0.5
    early_stop_patience: int = 50
    alpha: float = 0.5
    margin: float = 1.0
    batch_size: int = 32
    seed: int = 0
    disable_contrastive: bool = False
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")

    def to_json(self) -> dict:
        doc = {
            "learning_rate": self.learning_rate,
            "weight_decay": self.weight_decay,
            "optimizer_epsilon": self.optimizer_epsilon,
            "max_epochs": self.max_epochs,
            "scheduler_patience": self.scheduler_patience,
            "scheduler_factor": self.scheduler_factor,
            "early_stop_patience": self.early_stop_patience,
            "alpha": self.alpha,
            "margin": self.margin,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "disable_contrastive": self.disable_contrastive,
            "model": self.model.to_json(),
        }
        return doc

    @classmethod
    def from_json(cls, obj: dict) -> "TrainConfig":
        obj = dict(obj)
        model = ModelConfig.from_json(obj.pop("model", {}))
        return cls(model=model, **obj)


class PlateauController:
    """Best-value tracking for lr reduction and early stopping.

    Improvement means strictly lower validation loss. The learning rate is
    reduced after ``patience`` consecutive epochs without improvement;
    training stops after ``early_stop_patience`` epochs without a new best.
    """

    def __init__(self, patience: int, factor: float, early_stop_patience: int):
        self.patience = patience
        self.factor = factor
        self.early_stop_patience = early_stop_patience
        self.best = float("inf")
        self.bad_for_scheduler = 0
        self.bad_for_stopping = 0

    def update(self, val_loss: float) -> tuple[bool, bool, bool]:
        """Returns ``(improved, reduce_lr, stop)``."""
        if val_loss < self.best:
            self.best = val_loss
            self.bad_for_scheduler = 0
            self.bad_for_stopping = 0
            return True, False, False
        self.bad_for_scheduler += 1
        self.bad_for_stopping += 1
        reduce_lr = self.bad_for_scheduler >= self.patience
        if reduce_lr:
            self.bad_for_scheduler = 0
        return False, reduce_lr, self.bad_for_stopping >= self.early_stop_patience


@dataclass
class SampleTensors:
    video: np.ndarray | None  # (T, 512) float32, exact file content
    audio: np.ndarray | None  # (T, audio_dim) float64, mean-pooled to video length
    label: int


class EmbeddingCache:
    """In-memory per-sample tensors with uniform frame counts for batching."""

    def __init__(self, model: EmoForensicsModel, manifest: DatasetManifest):
        self.entries: dict[str, SampleTensors] = {}
        self.model = model
        lengths = set()
        for sample in manifest.samples:
            video = audio = None
            video_len = None
            if model.uses_video:
                seq = read_embedding_file(manifest.video_file(sample), sample_id=sample.id)
                video = seq.data
                video_len = seq.num_frames
            if model.uses_audio:
                seq = read_embedding_file(manifest.audio_file(sample), sample_id=sample.id)
                target = min(video_len, seq.num_frames) if video_len is not None else seq.num_frames
                audio = downsample_array(seq.data, target)
            lengths.add(video_len if video_len is not None else audio.shape[0])
            self.entries[sample.id] = SampleTensors(
                video=video, audio=audio, label=model.target_label(sample)
            )
        if len(lengths) > 1:
            raise TrainingError(f"mixed sequence lengths in one dataset: {sorted(lengths)}")

    def batch(self, ids: list[str]) -> tuple[torch.Tensor | None, torch.Tensor | None, torch.Tensor, list[int]]:
        rows = [self.entries[i] for i in ids]
        video = audio = None
        if self.model.uses_video:
            video = torch.from_numpy(np.stack([r.video for r in rows]).astype(np.float64))
        if self.model.uses_audio:
            audio = torch.from_numpy(np.stack([r.audio for r in rows]))
        labels = torch.tensor([r.label for r in rows], dtype=torch.float64)
        return video, audio, labels, [r.label for r in rows]


@dataclass
class TrainResult:
    model: EmoForensicsModel
    history: list[dict]
    best_epoch: int
    best_val_loss: float


def _batch_loss(
    model: EmoForensicsModel,
    cache: EmbeddingCache,
    ids: list[str],
    cfg: TrainConfig,
    training: bool,
    generator: torch.Generator | None,
) -> torch.Tensor:
    video, audio, targets, labels = cache.batch(ids)
    out = model.forward_batch(video, audio, training=training, generator=generator)
    bce = bce_with_logits(out["logit"], targets).mean()
    use_contrastive = cfg.model.modality == "both" and not cfg.disable_contrastive
    if not use_contrastive:
        return bce
    pairs = build_contrastive_pairs(labels, generator)
    contrast = pair_loss(out["h_v"], out["h_a"], pairs, cfg.margin)
    return combined_loss(bce, contrast, cfg.alpha)


def _epoch_val_loss(
    model: EmoForensicsModel, cache: EmbeddingCache, ids: list[str], cfg: TrainConfig
) -> float:
    # fixed pair draws across epochs so validation losses are comparable
    g_val = torch.Generator().manual_seed(cfg.seed + _VAL_SEED_OFFSET)
    total = 0.0
    with torch.no_grad():
        for start in range(0, len(ids), cfg.batch_size):
            chunk = ids[start : start + cfg.batch_size]
            loss = _batch_loss(model, cache, chunk, cfg, training=False, generator=g_val)
            total += float(loss) * len(chunk)
    return total / len(ids)


def train_emoforensics(
    train: DatasetManifest, val: DatasetManifest, cfg: TrainConfig
) -> TrainResult:
    """Train a detector, returning the best-validation-loss checkpoint.

    Preconditions: the training set holds both classes under the configured
    modality routing, and the validation set is nonempty.
    """
    if len(val) == 0:
        raise TrainingError("validation set is empty")
    generator = torch.Generator().manual_seed(cfg.seed)
    model = EmoForensicsModel(cfg.model, generator)
    train_labels = {model.target_label(s) for s in train.samples}
    if train_labels != {0, 1}:
        raise TrainingError("training set needs at least one real and one fake sample")

    train_cache = EmbeddingCache(model, train)
    val_cache = EmbeddingCache(model, val)
    train_ids = [s.id for s in train.samples]
    val_ids = [s.id for s in val.samples]

    optimizer = torch.optim.AdamW(
        model.parameters(),
        lr=cfg.learning_rate,
        weight_decay=cfg.weight_decay,
        eps=cfg.optimizer_epsilon,
    )
    controller = PlateauController(
        cfg.scheduler_patience, cfg.scheduler_factor, cfg.early_stop_patience
    )
    history: list[dict] = []
    best_state = copy.deepcopy(model.state_dict())
    best_epoch = 0

    for epoch in range(1, cfg.max_epochs + 1):
        order = torch.randperm(len(train_ids), generator=generator).tolist()
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            ids = [train_ids[i] for i in order[start : start + cfg.batch_size]]
            loss = _batch_loss(model, train_cache, ids, cfg, training=True, generator=generator)
            if not torch.isfinite(loss):
                raise TrainingError(
                    f"non-finite training loss at epoch {epoch}, batch starting {start}"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach()) * len(ids)
        epoch_loss /= len(train_ids)

        val_loss = _epoch_val_loss(model, val_cache, val_ids, cfg)
        if not np.isfinite(val_loss):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        lr_now = optimizer.param_groups[0]["lr"]
        history.append(
            {"epoch": epoch, "train_loss": epoch_loss, "val_loss": val_loss, "lr": lr_now}
        )
        improved, reduce_lr, stop = controller.update(val_loss)
        if improved:
            best_state = copy.deepcopy(model.state_dict())
            best_epoch = epoch
        if reduce_lr:
            for group in optimizer.param_groups:
                group["lr"] *= cfg.scheduler_factor
        if stop:
            break

    model.load_state_dict(best_state)
    return TrainResult(
        model=model, history=history, best_epoch=best_epoch, best_val_loss=controller.best
    )


def save_history(history: list[dict], path: str | Path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(history, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)
