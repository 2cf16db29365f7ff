"""Shared fixtures: tiny datasets with configurable embedding dimensions."""

from __future__ import annotations

import numpy as np
import pytest

from emoforensics.embeddings import EmbeddingSequence, Modality, write_embedding_file
from emoforensics.encoder import TransformerConfig
from emoforensics.manifest import DatasetManifest, Sample, save_manifest
from emoforensics.model import ModelConfig


def tiny_transformer(model_dim: int = 32, audio_dim: int = 48) -> ModelConfig:
    return ModelConfig(
        transformer=TransformerConfig(
            depth=1, model_dim=model_dim, num_heads=4, ffn_multiplier=2, max_seq_len=16
        ),
        audio_input_dim=audio_dim,
    )


def build_tiny_dataset(
    out_dir,
    num_real: int = 12,
    num_fake: int = 12,
    video_dim: int = 32,
    audio_dim: int = 48,
    video_len: int = 6,
    audio_len: int = 12,
    seed: int = 0,
    separation: float = 3.0,
) -> DatasetManifest:
    """Random embeddings where fakes carry a per-frame offset along one axis.

    Linearly separable on purpose: unit tests only need training mechanics,
    not the full temporal-inconsistency story.
    """
    rng = np.random.default_rng(seed)
    (out_dir / "emb").mkdir(parents=True, exist_ok=True)
    samples = []
    for i in range(num_real + num_fake):
        fake = i >= num_real
        video = rng.standard_normal((video_len, video_dim))
        audio = rng.standard_normal((audio_len, audio_dim))
        if fake:
            video[:, 0] += separation
            audio[:, 0] += separation
        sid = f"t{i:04d}"
        vp, ap = f"emb/{sid}_v.emb", f"emb/{sid}_a.emb"
        write_embedding_file(
            EmbeddingSequence(Modality.VIDEO, video.astype(np.float32), sid), out_dir / vp
        )
        write_embedding_file(
            EmbeddingSequence(Modality.AUDIO, audio.astype(np.float32), sid), out_dir / ap
        )
        samples.append(
            Sample(
                id=sid,
                video_fake=fake,
                audio_fake=fake,
                manipulation_tags=frozenset(["X"] if fake else []),
                group_key=sid,
                video_path=vp,
                audio_path=ap,
            )
        )
    manifest = DatasetManifest(samples=samples, base_dir=out_dir)
    save_manifest(manifest, out_dir / "manifest.json")
    return manifest


@pytest.fixture
def tiny_dataset(tmp_path):
    return build_tiny_dataset(tmp_path)
