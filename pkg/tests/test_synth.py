import hashlib
import json

import numpy as np
import pytest

from emoforensics.embeddings import downsample_array, read_embedding_file
from emoforensics.manifest import load_manifest
from emoforensics.synth import SynthConfig, generate_synthetic_dataset


def dir_digest(root):
    entries = {}
    for path in sorted(root.rglob("*")):
        if path.is_file():
            entries[str(path.relative_to(root))] = hashlib.sha256(path.read_bytes()).hexdigest()
    return entries


def test_counts_and_labels(tmp_path):
    cfg = SynthConfig(num_real=10, num_fake_video=5, num_fake_audio=5, seed=0)
    manifest = generate_synthetic_dataset(cfg, tmp_path)
    assert len(manifest) == 20
    assert sum(s.label for s in manifest.samples) == 10
    assert sum(s.video_fake for s in manifest.samples) == 5
    assert sum(s.audio_fake for s in manifest.samples) == 5


def test_flags_tags_and_shapes(tmp_path):
    cfg = SynthConfig(
        num_real=4, num_fake_video=3, num_fake_audio=2, num_fake_both=2,
        manipulation_tag_pool=("p", "q"), seed=1,
    )
    manifest = generate_synthetic_dataset(cfg, tmp_path)
    fakes = [s for s in manifest.samples if s.label == 1]
    assert all(len(s.manipulation_tags) == 1 for s in fakes)
    assert [sorted(s.manipulation_tags)[0] for s in fakes] == ["p", "q", "p", "q", "p", "q", "p"]
    assert all(not s.manipulation_tags for s in manifest.samples if s.label == 0)
    for s in manifest.samples:
        video = read_embedding_file(manifest.video_file(s))
        audio = read_embedding_file(manifest.audio_file(s))
        assert (video.num_frames, video.dim) == (16, 512)
        assert (audio.num_frames, audio.dim) == (32, 1024)


def test_determinism_bytes(tmp_path):
    cfg = SynthConfig(num_real=6, num_fake_video=3, num_fake_audio=3, seed=11)
    generate_synthetic_dataset(cfg, tmp_path / "a")
    generate_synthetic_dataset(cfg, tmp_path / "b")
    assert dir_digest(tmp_path / "a") == dir_digest(tmp_path / "b")
    different = SynthConfig(num_real=6, num_fake_video=3, num_fake_audio=3, seed=12)
    generate_synthetic_dataset(different, tmp_path / "c")
    assert dir_digest(tmp_path / "a") != dir_digest(tmp_path / "c")


def test_manifest_reloads_and_validates(tmp_path):
    cfg = SynthConfig(num_real=3, num_fake_both=2, seed=5)
    generate_synthetic_dataset(cfg, tmp_path)
    manifest = load_manifest(tmp_path / "manifest.json", verify_files=True)
    assert len(manifest) == 5
    stored = json.loads(manifest.metadata["config"])
    assert stored["seed"] == 5


def test_real_modalities_agree_after_downsampling(tmp_path):
    # both streams sample one latent curve, so pooled audio tracks video
    cfg = SynthConfig(num_real=12, seed=3)
    manifest = generate_synthetic_dataset(cfg, tmp_path)
    for s in manifest.samples[:4]:
        video = read_embedding_file(manifest.video_file(s)).data.astype(np.float64)
        audio = downsample_array(read_embedding_file(manifest.audio_file(s)).data, 16)
        # compare per-frame norms of the latent-driven signal across modalities
        video_profile = np.linalg.norm(video, axis=1)
        audio_profile = np.linalg.norm(audio, axis=1)
        corr = np.corrcoef(video_profile, audio_profile)[0, 1]
        assert corr > 0.8


def test_strength_zero_matches_real_law(tmp_path):
    cfg = SynthConfig(num_real=40, num_fake_video=40, inconsistency_strength=0.0, seed=9)
    manifest = generate_synthetic_dataset(cfg, tmp_path)
    disp = {0: [], 1: []}
    for s in manifest.samples:
        video = read_embedding_file(manifest.video_file(s)).data.astype(np.float64)
        dev = video - video.mean(axis=0, keepdims=True)
        disp[s.label].append((dev**2).sum(axis=1).mean())
    # the dispersion statistic that separates fakes at strength 1 sees nothing
    assert abs(np.mean(disp[0]) - np.mean(disp[1])) / np.mean(disp[0]) < 0.01


def test_invalid_configs():
    with pytest.raises(ValueError, match="counts"):
        SynthConfig(num_real=-1)
    with pytest.raises(ValueError, match="at least one"):
        SynthConfig()
    with pytest.raises(ValueError, match="tag_pool"):
        SynthConfig(num_real=1, num_fake_video=1, manipulation_tag_pool=())
    with pytest.raises(ValueError, match="strength"):
        SynthConfig(num_real=2, inconsistency_strength=-0.1)
