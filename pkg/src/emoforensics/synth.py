"""Seeded synthetic datasets with controllable emotion inconsistency.

Every real clip follows one smooth latent "emotion trajectory" (random
low-frequency sinusoids plus a per-clip offset) observed through two fixed
random linear maps into the 512-d video and 1024-d audio embedding spaces,
plus small observation noise. Both modalities sample the same continuous
trajectory, so they agree after the audio stream is mean-pooled to the video
frame count.

A fake modality replays the shared trajectory with one of two corruptions,
drawn 50/50 per fake modality and scaled by ``inconsistency_strength``:

* ``jump`` — step offsets injected at two change points (the displayed
  emotion lurches without cause);
* ``switch`` — from a mid-clip change point onward the trajectory rotates
  toward an independently drawn one (the clip drifts to a different emotion
  than the untouched modality).

Both corruptions vanish at strength 0, where fake and real streams follow
the same law and no detector can beat chance. Both leave a within-modality
discontinuity, which keeps fakes detectable by the additive-fusion
classifier; a whole-clip trajectory swap would be invisible to it because an
additively fused linear head decomposes into per-modality score functions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from emoforensics.embeddings import EmbeddingSequence, Modality, write_embedding_file
from emoforensics.manifest import DatasetManifest, Sample, save_manifest

VIDEO_DIM = 512
AUDIO_DIM = 1024
NOISE_SCALE = 0.03
JUMP_SCALE = 4.0
HARMONICS = 2


@dataclass
class SynthConfig:
    num_real: int = 0
    num_fake_video: int = 0
    num_fake_audio: int = 0
    num_fake_both: int = 0
    seq_len_video: int = 16
    seq_len_audio: int = 32
    latent_dim: int = 6
    inconsistency_strength: float = 1.0
    manipulation_tag_pool: tuple[str, ...] = ("A", "B", "C", "D")
    seed: int = 0

    def __post_init__(self) -> None:
        counts = (self.num_real, self.num_fake_video, self.num_fake_audio, self.num_fake_both)
        if min(counts) < 0:
            raise ValueError("sample counts must be >= 0")
        if sum(counts) < 1:
            raise ValueError("need at least one sample")
        if self.inconsistency_strength < 0:
            raise ValueError("inconsistency_strength must be >= 0")
        if self.num_fakes > 0 and not self.manipulation_tag_pool:
            raise ValueError("fakes requested but manipulation_tag_pool is empty")
        if min(self.seq_len_video, self.seq_len_audio, self.latent_dim) < 1:
            raise ValueError("sequence lengths and latent_dim must be >= 1")

    @property
    def num_fakes(self) -> int:
        return self.num_fake_video + self.num_fake_audio + self.num_fake_both

    def to_json(self) -> dict:
        return {
            "num_real": self.num_real,
            "num_fake_video": self.num_fake_video,
            "num_fake_audio": self.num_fake_audio,
            "num_fake_both": self.num_fake_both,
            "seq_len_video": self.seq_len_video,
            "seq_len_audio": self.seq_len_audio,
            "latent_dim": self.latent_dim,
            "inconsistency_strength": self.inconsistency_strength,
            "manipulation_tag_pool": list(self.manipulation_tag_pool),
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SynthConfig":
        obj = dict(obj)
        pool = tuple(obj.pop("manipulation_tag_pool", ("A", "B", "C", "D")))
        return cls(manipulation_tag_pool=pool, **obj)


class _Trajectory:
    """Smooth latent emotion curve over clip time t in [0, 1].

    Per-clip offset gives each clip its own base emotion. The sinusoid
    amplitudes are rescaled so every dimension's realized wave has unit
    standard deviation over the clip, giving all real clips the same
    within-clip variability; injected discontinuities then stand out.
    """

    _REFERENCE_GRID = (np.arange(128) + 0.5) / 128

    def __init__(self, rng: np.random.Generator, latent_dim: int):
        self.offset = rng.standard_normal(latent_dim)
        self.freqs = rng.uniform(0.4, 1.2, HARMONICS)
        self.amps = rng.standard_normal((latent_dim, HARMONICS))
        self.phases = rng.uniform(0.0, 2.0 * math.pi, (latent_dim, HARMONICS))
        realized = self._waves(self._REFERENCE_GRID).std(axis=0)
        self.amps = self.amps / realized[:, None]

    def _waves(self, times: np.ndarray) -> np.ndarray:
        arg = 2.0 * math.pi * times[:, None] * self.freqs[None, :]
        waves = np.sin(arg[None, :, :] + self.phases[:, None, :])  # (k, T, H)
        return (waves * self.amps[:, None, :]).sum(axis=2).T

    def eval(self, times: np.ndarray) -> np.ndarray:
        return self._waves(times) + self.offset


LatentFn = Callable[[np.ndarray], np.ndarray]


def _corrupt(rng: np.random.Generator, base: _Trajectory, cfg: SynthConfig) -> LatentFn:
    strength = cfg.inconsistency_strength
    if rng.integers(2) == 0:
        # jump: step offsets at two change points
        taus = np.sort(rng.uniform(0.15, 0.9, 2))
        deltas = rng.standard_normal((2, cfg.latent_dim)) * (strength * JUMP_SCALE)

        def jump(times: np.ndarray) -> np.ndarray:
            value = base.eval(times)
            for tau, delta in zip(taus, deltas):
                value[times >= tau] += delta
            return value

        return jump
    # switch: rotate toward an independent trajectory from a change point on;
    # the replacement sits at a guaranteed-distant base emotion
    tau = rng.uniform(0.25, 0.75)
    other = _Trajectory(rng, cfg.latent_dim)
    other.offset = base.offset + rng.standard_normal(cfg.latent_dim) * (strength * JUMP_SCALE)
    theta = min(strength, 1.0) * math.pi / 2.0

    def switch(times: np.ndarray) -> np.ndarray:
        value = base.eval(times)
        mask = times >= tau
        value[mask] = math.cos(theta) * value[mask] + math.sin(theta) * other.eval(times)[mask]
        return value

    return switch


def _midpoints(length: int) -> np.ndarray:
    return (np.arange(length) + 0.5) / length


def generate_synthetic_dataset(cfg: SynthConfig, out_dir: str | Path) -> DatasetManifest:
    """Write embedding files plus ``manifest.json`` under ``out_dir``.

    Deterministic: the same config produces byte-identical files. Fakes draw
    their single manipulation tag round-robin from the tag pool.
    """
    out_dir = Path(out_dir)
    (out_dir / "embeddings").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    map_video = rng.standard_normal((cfg.latent_dim, VIDEO_DIM)) / math.sqrt(cfg.latent_dim)
    map_audio = rng.standard_normal((cfg.latent_dim, AUDIO_DIM)) / math.sqrt(cfg.latent_dim)
    video_times = _midpoints(cfg.seq_len_video)
    audio_times = _midpoints(cfg.seq_len_audio)

    flags = (
        [(False, False)] * cfg.num_real
        + [(True, False)] * cfg.num_fake_video
        + [(False, True)] * cfg.num_fake_audio
        + [(True, True)] * cfg.num_fake_both
    )
    samples = []
    fake_counter = 0
    for index, (video_fake, audio_fake) in enumerate(flags):
        base = _Trajectory(rng, cfg.latent_dim)
        video_fn: LatentFn = base.eval
        audio_fn: LatentFn = base.eval
        if video_fake:
            video_fn = _corrupt(rng, base, cfg)
        if audio_fake:
            audio_fn = _corrupt(rng, base, cfg)
        z_video = video_fn(video_times) @ map_video + NOISE_SCALE * rng.standard_normal(
            (cfg.seq_len_video, VIDEO_DIM)
        )
        z_audio = audio_fn(audio_times) @ map_audio + NOISE_SCALE * rng.standard_normal(
            (cfg.seq_len_audio, AUDIO_DIM)
        )
        sample_id = f"clip{index:05d}"
        video_path = f"embeddings/{sample_id}_video.emb"
        audio_path = f"embeddings/{sample_id}_audio.emb"
        write_embedding_file(
            EmbeddingSequence(Modality.VIDEO, z_video.astype(np.float32), sample_id),
            out_dir / video_path,
        )
        write_embedding_file(
            EmbeddingSequence(Modality.AUDIO, z_audio.astype(np.float32), sample_id),
            out_dir / audio_path,
        )
        tags: frozenset[str] = frozenset()
        if video_fake or audio_fake:
            pool = cfg.manipulation_tag_pool
            tags = frozenset([pool[fake_counter % len(pool)]])
            fake_counter += 1
        samples.append(
            Sample(
                id=sample_id,
                video_fake=video_fake,
                audio_fake=audio_fake,
                manipulation_tags=tags,
                group_key=sample_id,
                video_path=video_path,
                audio_path=audio_path,
            )
        )
    manifest = DatasetManifest(
        samples=samples,
        metadata={"generator": "synthetic", "config": json.dumps(cfg.to_json(), sort_keys=True)},
    )
    manifest.base_dir = out_dir
    save_manifest(manifest, out_dir / "manifest.json")
    return manifest
