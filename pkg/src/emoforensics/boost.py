"""Frozen late fusion of the emotion detector with a low-level detector.

The trained emotion model and the external detector are both frozen; only a
small projection MLP (emotion representation -> detector feature width) and a
single-layer classification head learn. Fusion is element-wise
multiplication by default, with addition and concatenation as ablations.

A controllable mock detector stands in for real RGB/acoustic detectors at
desk scale: its features carry a label-aligned component of strength ``rho``
that can be switched off for chosen manipulation tags ("blind" tags), which
is what makes the complementarity experiments possible.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np
import torch
from torch import nn

from emoforensics import checkpoint as ckpt
from emoforensics.embeddings import EmbeddingSequence, Modality, read_embedding_file, write_embedding_file
from emoforensics.encoder import Affine
from emoforensics.losses import bce_with_logits
from emoforensics.manifest import DatasetManifest, Sample
from emoforensics.model import EmoForensicsModel, load_tensors_into
from emoforensics.seeding import derive_seed
from emoforensics.training import PlateauController, TrainingError

# scale of the label-aligned feature component at rho = 1; chosen so a
# linear probe on a strong mock detector lands in the mid-0.9 AUC range
LABEL_COMPONENT_SCALE = 4.0


class FrozenDetector(Protocol):
    """Any frozen detector exposing a fixed-length feature vector per sample."""

    detector_id: str
    feature_dim: int

    def features(self, sample: Sample) -> np.ndarray: ...


@dataclass
class MockDetectorConfig:
    feature_dim: int = 256
    signal_strength: float = 1.0
    blind_tags: frozenset[str] = frozenset()
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.signal_strength <= 1.0:
            raise ValueError("signal_strength must be in [0, 1]")
        self.blind_tags = frozenset(self.blind_tags)

    def to_json(self) -> dict:
        return {
            "feature_dim": self.feature_dim,
            "signal_strength": self.signal_strength,
            "blind_tags": sorted(self.blind_tags),
            "seed": self.seed,
        }


class MockDetector:
    """Deterministic stand-in for an off-the-shelf low-level detector.

    The feature vector for a sample is a seeded hash of its id around a
    positive mean (mirroring post-activation feature statistics, which is
    what lets element-wise product fusion transmit a co-factor's signal)
    plus, for fakes whose tags are not blinded, ``rho * scale`` along a
    fixed unit direction. A linear probe on these features reaches an AUC
    that grows monotonically with ``rho`` and stays at chance on blinded
    tags.
    """

    FEATURE_MEAN = 1.0

    def __init__(self, cfg: MockDetectorConfig):
        self.cfg = cfg
        self.detector_id = f"mock-{cfg.seed}"
        self.feature_dim = cfg.feature_dim
        rng = np.random.default_rng(derive_seed(cfg.seed, "label-direction"))
        direction = rng.standard_normal(cfg.feature_dim)
        self.label_direction = direction / np.linalg.norm(direction)

    def label_component(self, sample: Sample) -> np.ndarray:
        blinded = bool(sample.manipulation_tags & self.cfg.blind_tags)
        if sample.label == 1 and not blinded:
            return self.cfg.signal_strength * LABEL_COMPONENT_SCALE * self.label_direction
        return np.zeros(self.cfg.feature_dim)

    def features(self, sample: Sample) -> np.ndarray:
        rng = np.random.default_rng(derive_seed(self.cfg.seed, f"sample/{sample.id}"))
        base = self.FEATURE_MEAN + rng.standard_normal(self.cfg.feature_dim)
        return base + self.label_component(sample)


class SidecarDetector:
    """Frozen detector backed by exported per-sample feature files.

    The sidecar is a JSON index mapping sample id to a file in the embedding
    format with a single row of width ``feature_dim``.
    """

    def __init__(self, index_path: str | Path, detector_id: str = "sidecar"):
        self.index_path = Path(index_path)
        self.detector_id = detector_id
        self.index: dict[str, str] = json.loads(self.index_path.read_text())
        if not self.index:
            raise ValueError(f"{index_path}: empty detector sidecar")
        first = next(iter(sorted(self.index)))
        self.feature_dim = self._read(first).shape[0]

    def _read(self, sample_id: str) -> np.ndarray:
        path = self.index_path.parent / self.index[sample_id]
        seq = read_embedding_file(path, sample_id=sample_id)
        if seq.num_frames != 1:
            raise ValueError(f"detector feature file for {sample_id} must have exactly 1 row")
        return seq.data[0].astype(np.float64)

    def features(self, sample: Sample) -> np.ndarray:
        if sample.id not in self.index:
            raise KeyError(f"sample {sample.id} missing from detector sidecar")
        return self._read(sample.id)


def write_feature_sidecar(
    features: dict[str, np.ndarray], out_dir: str | Path, index_name: str = "detector_index.json"
) -> Path:
    """Export per-sample feature vectors in the sidecar layout."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = {}
    for sample_id in sorted(features):
        vec = np.asarray(features[sample_id], dtype=np.float32).reshape(1, -1)
        name = f"{sample_id}.emb"
        write_embedding_file(
            EmbeddingSequence(Modality.VIDEO, vec, sample_id=sample_id), out_dir / name
        )
        index[sample_id] = name
    index_path = out_dir / index_name
    tmp = index_path.with_name(index_path.name + ".tmp")
    tmp.write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, index_path)
    return index_path


def linear_probe_auc(
    train_x: np.ndarray, train_y: np.ndarray, test_x: np.ndarray, test_y: np.ndarray
) -> float:
    """AUC of the class-mean-difference probe, the fixed detector readout.

    Scoring along ``mean(fake) - mean(real)`` is the infinite-ridge limit of
    a trained linear classifier; AUC only depends on the direction, so this
    is parameter-free and immune to the d > n interpolation regime.
    """
    from emoforensics.metrics import ScoredSet, roc_auc

    x = np.asarray(train_x, dtype=np.float64)
    y = np.asarray(train_y)
    direction = x[y == 1].mean(axis=0) - x[y == 0].mean(axis=0)
    scores = np.asarray(test_x, dtype=np.float64) @ direction
    return roc_auc(ScoredSet(scores, test_y))


# ---------------------------------------------------------------------------
# trainable fusion heads
# ---------------------------------------------------------------------------

LATE_FUSION_STRATEGIES = ("product", "add", "concat")


def fuse_late(projected: torch.Tensor, detector: torch.Tensor, strategy: str = "product") -> torch.Tensor:
    """Combine projected emotion features with detector features."""
    if projected.shape != detector.shape:
        raise ValueError(f"fusion shapes differ: {projected.shape} vs {detector.shape}")
    if strategy == "product":
        return projected * detector
    if strategy == "add":
        return projected + detector
    if strategy == "concat":
        return torch.cat([projected, detector], dim=-1)
    raise ValueError(f"unknown late-fusion strategy {strategy!r}")


@dataclass
class EmoBoostConfig:
    learning_rate: float = 1e-3
    weight_decay: float = 0.05
    optimizer_epsilon: float = 1e-8
    max_epochs: int = 20
    scheduler_patience: int = 4
    scheduler_factor: float = 0.5
    early_stop_patience: int = 8
    batch_size: int = 32
    seed: int = 0
    fusion: str = "product"
    projection_depth: int = 2

    def __post_init__(self) -> None:
        if self.fusion not in LATE_FUSION_STRATEGIES:
            raise ValueError(f"fusion must be one of {LATE_FUSION_STRATEGIES}")
        if self.projection_depth < 1:
            raise ValueError("projection_depth must be >= 1")

    def to_json(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "weight_decay": self.weight_decay,
            "optimizer_epsilon": self.optimizer_epsilon,
            "max_epochs": self.max_epochs,
            "scheduler_patience": self.scheduler_patience,
            "scheduler_factor": self.scheduler_factor,
            "early_stop_patience": self.early_stop_patience,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "fusion": self.fusion,
            "projection_depth": self.projection_depth,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EmoBoostConfig":
        return cls(**obj)


class ProjectionHead(nn.Module):
    """MLP mapping the emotion representation to the detector feature width."""

    def __init__(self, in_dim: int, out_dim: int, depth: int, generator: torch.Generator):
        super().__init__()
        dims = [in_dim] + [out_dim] * depth
        self.layers = nn.ModuleList(
            Affine(dims[i], dims[i + 1], generator) for i in range(depth)
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i + 1 < len(self.layers):
                x = torch.nn.functional.gelu(x)
        return x


class EmoBoostHeads(nn.Module):
    """The only trainable pieces of the late-fusion stage."""

    def __init__(
        self,
        emotion_dim: int,
        detector_dim: int,
        cfg: EmoBoostConfig,
        generator: torch.Generator,
    ):
        super().__init__()
        self.cfg = cfg
        self.emotion_dim = emotion_dim
        self.detector_dim = detector_dim
        self.projection = ProjectionHead(emotion_dim, detector_dim, cfg.projection_depth, generator)
        head_width = 2 * detector_dim if cfg.fusion == "concat" else detector_dim
        self.head = Affine(head_width, 1, generator)

    def forward(self, emotion: torch.Tensor, detector: torch.Tensor) -> torch.Tensor:
        projected = self.projection(emotion)
        fused = fuse_late(projected, detector, self.cfg.fusion)
        return self.head(fused).squeeze(-1)

    def scores(self, emotion: np.ndarray, detector: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            logits = self.forward(
                torch.from_numpy(np.asarray(emotion, dtype=np.float64)),
                torch.from_numpy(np.asarray(detector, dtype=np.float64)),
            )
            return torch.sigmoid(logits).numpy()

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: p.detach().numpy().copy() for name, p in self.named_parameters()}

    def save(self, path: str | Path, extra_meta: dict | None = None) -> None:
        meta = {
            "kind": "emoboost",
            "emotion_dim": self.emotion_dim,
            "detector_dim": self.detector_dim,
            "config": self.cfg.to_json(),
        }
        if extra_meta:
            meta.update(extra_meta)
        ckpt.write_checkpoint(self.tensors(), path, meta=meta)

    @classmethod
    def load(cls, path: str | Path) -> "EmoBoostHeads":
        tensors, meta = ckpt.read_checkpoint(path)
        if meta.get("kind") != "emoboost":
            raise ckpt.CheckpointError(f"{path}: not a fusion-head checkpoint")
        heads = cls(
            meta["emotion_dim"],
            meta["detector_dim"],
            EmoBoostConfig.from_json(meta["config"]),
            torch.Generator().manual_seed(0),
        )
        load_tensors_into(heads, tensors)
        return heads


def compute_joint_reprs(
    model: EmoForensicsModel, manifest: DatasetManifest, ids: list[str], batch_size: int = 64
) -> np.ndarray:
    """Frozen emotion representations f_e for the given sample ids."""
    lookup = manifest.by_id()
    reprs = []
    with torch.no_grad():
        for start in range(0, len(ids), batch_size):
            chunk = ids[start : start + batch_size]
            videos, audios = [], []
            for sample_id in chunk:
                video, audio = model.load_sample_tensors(manifest, lookup[sample_id])
                videos.append(video)
                audios.append(audio)
            out = model.forward_batch(
                torch.stack(videos) if videos[0] is not None else None,
                torch.stack(audios) if audios[0] is not None else None,
                training=False,
            )
            reprs.append(out["joint"].numpy())
    return np.concatenate(reprs, axis=0)


def detector_features(
    detector: FrozenDetector, manifest: DatasetManifest, ids: list[str]
) -> np.ndarray:
    lookup = manifest.by_id()
    return np.stack([detector.features(lookup[i]).astype(np.float64) for i in ids])


@dataclass
class EmoBoostResult:
    heads: EmoBoostHeads
    history: list[dict]
    best_epoch: int
    best_val_loss: float


def train_emoboost(
    train: DatasetManifest,
    val: DatasetManifest,
    emoforensics: EmoForensicsModel,
    detector: FrozenDetector,
    cfg: EmoBoostConfig,
) -> EmoBoostResult:
    """Train projection + head on frozen features.

    The emotion model and the detector are consumed through ``no_grad``
    feature extraction, so no gradient can reach them; their checkpoints are
    bitwise identical before and after (asserted in the test suite).
    """
    if len(train) == 0 or len(val) == 0:
        raise TrainingError("train and val must be nonempty")
    train_ids = [s.id for s in train.samples]
    val_ids = [s.id for s in val.samples]
    train_emotion = compute_joint_reprs(emoforensics, train, train_ids)
    val_emotion = compute_joint_reprs(emoforensics, val, val_ids)
    train_detector = detector_features(detector, train, train_ids)
    val_detector = detector_features(detector, val, val_ids)
    if train_detector.shape[1] != detector.feature_dim:
        raise TrainingError("detector feature width disagrees with its declared dimension")

    train_y = torch.tensor([s.label for s in train.samples], dtype=torch.float64)
    val_y = torch.tensor([s.label for s in val.samples], dtype=torch.float64)
    generator = torch.Generator().manual_seed(cfg.seed)
    heads = EmoBoostHeads(train_emotion.shape[1], detector.feature_dim, cfg, generator)
    optimizer = torch.optim.AdamW(
        heads.parameters(),
        lr=cfg.learning_rate,
        weight_decay=cfg.weight_decay,
        eps=cfg.optimizer_epsilon,
    )
    controller = PlateauController(
        cfg.scheduler_patience, cfg.scheduler_factor, cfg.early_stop_patience
    )
    emotion_t = torch.from_numpy(train_emotion)
    detector_t = torch.from_numpy(train_detector)
    val_emotion_t = torch.from_numpy(val_emotion)
    val_detector_t = torch.from_numpy(val_detector)

    history: list[dict] = []
    best_state = copy.deepcopy(heads.state_dict())
    best_epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = torch.randperm(len(train_ids), generator=generator)
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            logits = heads(emotion_t[idx], detector_t[idx])
            loss = bce_with_logits(logits, train_y[idx]).mean()
            if not torch.isfinite(loss):
                raise TrainingError(f"non-finite fusion loss at epoch {epoch}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach()) * len(idx)
        epoch_loss /= len(train_ids)
        with torch.no_grad():
            val_loss = float(bce_with_logits(heads(val_emotion_t, val_detector_t), val_y).mean())
        history.append(
            {
                "epoch": epoch,
                "train_loss": epoch_loss,
                "val_loss": val_loss,
                "lr": optimizer.param_groups[0]["lr"],
            }
        )
        improved, reduce_lr, stop = controller.update(val_loss)
        if improved:
            best_state = copy.deepcopy(heads.state_dict())
            best_epoch = epoch
        if reduce_lr:
            for group in optimizer.param_groups:
                group["lr"] *= cfg.scheduler_factor
        if stop:
            break
    heads.load_state_dict(best_state)
    return EmoBoostResult(
        heads=heads, history=history, best_epoch=best_epoch, best_val_loss=controller.best
    )
