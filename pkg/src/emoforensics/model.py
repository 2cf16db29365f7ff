"""The emotion-consistency deepfake detector.

Full pipeline: per-modality temporal encoders pool frame-level emotion
embeddings into 512-d representations, which are fused (element-wise
addition by default) and classified by a single linear head. Ablation
switches cover every reduced variant: transformer-free temporal mean
pooling, unimodal routing with modality-specific heads, and (at the loss
level, see :mod:`emoforensics.training`) dropping the contrastive term.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
import torch
from torch import nn

from emoforensics import checkpoint as ckpt
from emoforensics.embeddings import downsample_array, read_embedding_file
from emoforensics.encoder import (
    AUDIO_INPUT_DIM,
    Affine,
    AudioProjection,
    TemporalEncoder,
    TransformerConfig,
)
from emoforensics.manifest import DatasetManifest, Sample

FusionStrategy = Literal["add", "concat", "product"]
ModalityMode = Literal["both", "video_only", "audio_only"]

FUSION_STRATEGIES = ("add", "concat", "product")
MODALITY_MODES = ("both", "video_only", "audio_only")


def fuse_modalities(h_v: torch.Tensor, h_a: torch.Tensor, strategy: str) -> torch.Tensor:
    """Joint representation from the two pooled modality vectors.

    ``add`` and ``product`` are coordinate-wise (symmetric); ``concat``
    places the video block first.
    """
    if h_v.shape != h_a.shape:
        raise ValueError(f"modality shapes differ: {h_v.shape} vs {h_a.shape}")
    if strategy == "add":
        return h_v + h_a
    if strategy == "product":
        return h_v * h_a
    if strategy == "concat":
        return torch.cat([h_v, h_a], dim=-1)
    raise ValueError(f"unknown fusion strategy {strategy!r}")


def fusion_width(strategy: str, model_dim: int) -> int:
    return 2 * model_dim if strategy == "concat" else model_dim


@dataclass
class ModelConfig:
    transformer: TransformerConfig = field(default_factory=TransformerConfig)
    fusion_strategy: str = "add"
    modality: str = "both"
    disable_temporal_transformers: bool = False
    audio_input_dim: int = AUDIO_INPUT_DIM

    def __post_init__(self) -> None:
        if self.fusion_strategy not in FUSION_STRATEGIES:
            raise ValueError(f"fusion_strategy must be one of {FUSION_STRATEGIES}")
        if self.modality not in MODALITY_MODES:
            raise ValueError(f"modality must be one of {MODALITY_MODES}")

    def to_json(self) -> dict:
        return {
            "transformer": self.transformer.to_json(),
            "fusion_strategy": self.fusion_strategy,
            "modality": self.modality,
            "disable_temporal_transformers": self.disable_temporal_transformers,
            "audio_input_dim": self.audio_input_dim,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelConfig":
        obj = dict(obj)
        transformer = TransformerConfig(**obj.pop("transformer", {}))
        return cls(transformer=transformer, **obj)


@dataclass
class Prediction:
    """Model output for one sample; the joint representation feeds Emo-Boost."""

    probability: float
    logit: float
    joint_repr: np.ndarray
    fusion_strategy: str


class EmoForensicsModel(nn.Module):
    def __init__(self, cfg: ModelConfig, generator: torch.Generator):
        super().__init__()
        self.cfg = cfg
        tcfg = cfg.transformer
        self.uses_video = cfg.modality in ("both", "video_only")
        self.uses_audio = cfg.modality in ("both", "audio_only")
        if self.uses_audio:
            self.audio_proj = AudioProjection(generator, cfg.audio_input_dim, tcfg.model_dim)
        if not cfg.disable_temporal_transformers:
            if self.uses_video:
                self.video_encoder = TemporalEncoder(tcfg, generator)
            if self.uses_audio:
                self.audio_encoder = TemporalEncoder(tcfg, generator)
        head_width = (
            fusion_width(cfg.fusion_strategy, tcfg.model_dim)
            if cfg.modality == "both"
            else tcfg.model_dim
        )
        self.head = Affine(head_width, 1, generator)

    # -- per-modality encoders ------------------------------------------------

    def encode_video(
        self, frames: torch.Tensor, training: bool = False, generator: torch.Generator | None = None
    ) -> torch.Tensor:
        if self.cfg.disable_temporal_transformers:
            return frames.mean(dim=-2)
        return self.video_encoder(frames, training=training, generator=generator)

    def encode_audio(
        self, frames: torch.Tensor, training: bool = False, generator: torch.Generator | None = None
    ) -> torch.Tensor:
        if self.cfg.disable_temporal_transformers:
            return self.audio_proj(frames.mean(dim=-2))
        return self.audio_encoder(self.audio_proj(frames), training=training, generator=generator)

    # -- forward --------------------------------------------------------------

    def forward_batch(
        self,
        video: torch.Tensor | None,
        audio: torch.Tensor | None,
        training: bool = False,
        generator: torch.Generator | None = None,
    ) -> dict[str, torch.Tensor]:
        """Batched forward pass on already length-aligned float64 tensors.

        ``video`` is (B, T, 512); ``audio`` is (B, T, audio_input_dim),
        already downsampled to the video frame count. Unused modalities may
        be ``None``. Returns the representations plus the head logit.
        """
        out: dict[str, torch.Tensor] = {}
        if self.uses_video:
            if video is None:
                raise ValueError("model requires the video stream")
            out["h_v"] = self.encode_video(video, training, generator)
        if self.uses_audio:
            if audio is None:
                raise ValueError("model requires the audio stream")
            out["h_a"] = self.encode_audio(audio, training, generator)
        if self.cfg.modality == "both":
            out["joint"] = fuse_modalities(out["h_v"], out["h_a"], self.cfg.fusion_strategy)
        elif self.cfg.modality == "video_only":
            out["joint"] = out["h_v"]
        else:
            out["joint"] = out["h_a"]
        out["logit"] = self.head(out["joint"]).squeeze(-1)
        if not torch.isfinite(out["logit"]).all():
            raise FloatingPointError("non-finite classifier logit")
        return out

    def target_label(self, sample: Sample) -> int:
        """Training/eval label under the configured modality routing."""
        if self.cfg.modality == "video_only":
            return int(sample.video_fake)
        if self.cfg.modality == "audio_only":
            return int(sample.audio_fake)
        return sample.label

    def load_sample_tensors(
        self, manifest: DatasetManifest, sample: Sample
    ) -> tuple[torch.Tensor | None, torch.Tensor | None]:
        """Read the sample's embedding files; audio is mean-pooled to the video length.

        Unused modalities are never read, so e.g. a corrupt audio file cannot
        influence a video-only model.
        """
        video = audio = None
        video_len = None
        if self.uses_video:
            seq = read_embedding_file(manifest.video_file(sample), sample_id=sample.id)
            video = torch.from_numpy(seq.data.astype(np.float64))
            video_len = seq.num_frames
        if self.uses_audio:
            seq = read_embedding_file(manifest.audio_file(sample), sample_id=sample.id)
            target = min(video_len, seq.num_frames) if video_len is not None else seq.num_frames
            audio = torch.from_numpy(downsample_array(seq.data, target))
        return video, audio

    def predict_sample(self, manifest: DatasetManifest, sample: Sample) -> Prediction:
        """Deterministic single-sample inference from embedding files."""
        video, audio = self.load_sample_tensors(manifest, sample)
        with torch.no_grad():
            out = self.forward_batch(
                video.unsqueeze(0) if video is not None else None,
                audio.unsqueeze(0) if audio is not None else None,
                training=False,
            )
        logit = float(out["logit"][0])
        return Prediction(
            probability=float(torch.sigmoid(out["logit"][0])),
            logit=logit,
            joint_repr=out["joint"][0].numpy().copy(),
            fusion_strategy=self.cfg.fusion_strategy,
        )

    # -- persistence ----------------------------------------------------------

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: p.detach().numpy().copy() for name, p in self.named_parameters()}

    def save(self, path: str | Path, extra_meta: dict | None = None) -> None:
        meta = {"kind": "emoforensics", "model": self.cfg.to_json()}
        if extra_meta:
            meta.update(extra_meta)
        ckpt.write_checkpoint(self.tensors(), path, meta=meta)

    @classmethod
    def load(cls, path: str | Path) -> "EmoForensicsModel":
        tensors, meta = ckpt.read_checkpoint(path)
        if meta.get("kind") != "emoforensics":
            raise ckpt.CheckpointError(f"{path}: not a detector checkpoint")
        model = cls(ModelConfig.from_json(meta["model"]), torch.Generator().manual_seed(0))
        load_tensors_into(model, tensors)
        return model


def load_tensors_into(module: nn.Module, tensors: dict[str, np.ndarray]) -> None:
    names = {name for name, _ in module.named_parameters()}
    if names != set(tensors):
        missing = sorted(names - set(tensors))
        extra = sorted(set(tensors) - names)
        raise ckpt.CheckpointError(f"parameter mismatch: missing {missing}, extra {extra}")
    with torch.no_grad():
        for name, param in module.named_parameters():
            value = torch.from_numpy(np.asarray(tensors[name], dtype=np.float64))
            if value.shape != param.shape:
                raise ckpt.CheckpointError(f"shape mismatch for {name}")
            param.copy_(value)
