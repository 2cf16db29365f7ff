import numpy as np
import pytest
import torch

from conftest import build_tiny_dataset, tiny_transformer
from emoforensics.boost import (
    EmoBoostConfig,
    EmoBoostHeads,
    MockDetector,
    MockDetectorConfig,
    ProjectionHead,
    SidecarDetector,
    fuse_late,
    linear_probe_auc,
    train_emoboost,
    write_feature_sidecar,
)
from emoforensics.checkpoint import checkpoint_hash
from emoforensics.manifest import Sample
from emoforensics.splits import make_in_domain_split
from emoforensics.training import TrainConfig, train_emoforensics


def fake_sample(i, tags=("A",)):
    return Sample(f"f{i}", True, False, frozenset(tags), f"f{i}", "v", "a")


def real_sample(i):
    return Sample(f"r{i}", False, False, frozenset(), f"r{i}", "v", "a")


def test_mock_detector_deterministic():
    det = MockDetector(MockDetectorConfig(seed=5))
    s = fake_sample(0)
    assert np.array_equal(det.features(s), det.features(s))
    other = MockDetector(MockDetectorConfig(seed=6))
    assert not np.array_equal(det.features(s), other.features(s))


def test_blinding_removes_exactly_the_label_component():
    cfg = MockDetectorConfig(signal_strength=0.7, blind_tags=frozenset(["A"]), seed=1)
    det = MockDetector(cfg)
    tagged = fake_sample(3, tags=("A",))
    untagged = fake_sample(3, tags=("B",))  # same id, different tag
    diff = det.features(untagged) - det.features(tagged)
    np.testing.assert_allclose(diff, det.label_component(untagged), atol=1e-12)
    assert np.linalg.norm(det.label_component(tagged)) == 0.0
    assert np.linalg.norm(det.label_component(real_sample(0))) == 0.0


def probe_auc_at(rho, n=400, seed=0):
    det = MockDetector(MockDetectorConfig(signal_strength=rho, seed=seed))
    samples = [real_sample(i) for i in range(n // 2)] + [fake_sample(i) for i in range(n // 2)]
    features = np.stack([det.features(s) for s in samples])
    labels = np.array([s.label for s in samples])
    half = n // 4
    train_idx = np.r_[0 : half, n // 2 : n // 2 + half]
    test_idx = np.setdiff1d(np.arange(n), train_idx)
    return linear_probe_auc(features[train_idx], labels[train_idx], features[test_idx], labels[test_idx])


def test_probe_auc_monotone_in_signal_strength():
    aucs = [probe_auc_at(rho) for rho in (0.0, 0.4, 0.8)]
    assert 0.4 < aucs[0] < 0.6  # no signal -> chance
    assert aucs[0] < aucs[1] < aucs[2]
    assert aucs[2] > 0.9


def test_projection_head_shapes_and_zero_params():
    g = torch.Generator().manual_seed(0)
    proj = ProjectionHead(12, 5, depth=2, generator=g)
    x = torch.randn(7, 12, dtype=torch.float64)
    assert proj(x).shape == (7, 5)
    with torch.no_grad():
        for p in proj.parameters():
            p.zero_()
    assert torch.equal(proj(x), torch.zeros(7, 5, dtype=torch.float64))


def test_projection_head_matches_manual_oracle():
    g = torch.Generator().manual_seed(1)
    proj = ProjectionHead(6, 4, depth=2, generator=g)
    x = torch.randn(3, 6, dtype=torch.float64)
    w1 = proj.layers[0].weight.detach().numpy()
    b1 = proj.layers[0].bias.detach().numpy()
    w2 = proj.layers[1].weight.detach().numpy()
    b2 = proj.layers[1].bias.detach().numpy()
    import math

    hidden = x.numpy() @ w1.T + b1
    unit_normal_cdf = np.vectorize(lambda v: 0.5 * (1.0 + math.erf(v / math.sqrt(2.0))))
    gelu = hidden * unit_normal_cdf(hidden)
    expected = gelu @ w2.T + b2
    np.testing.assert_allclose(proj(x).detach().numpy(), expected, atol=1e-12)


def test_fuse_late_identities():
    ones = torch.ones(4, dtype=torch.float64)
    zeros = torch.zeros(4, dtype=torch.float64)
    f_d = torch.tensor([1.0, -2.0, 3.0, 4.0], dtype=torch.float64)
    assert torch.equal(fuse_late(ones, f_d, "product"), f_d)
    assert torch.equal(fuse_late(zeros, f_d, "product"), zeros)
    a = torch.tensor([2.0, 3.0], dtype=torch.float64)
    b = torch.tensor([4.0, 5.0], dtype=torch.float64)
    assert torch.equal(fuse_late(a, b, "product"), torch.tensor([8.0, 15.0], dtype=torch.float64))
    assert torch.equal(fuse_late(a, b, "product"), fuse_late(b, a, "product"))
    assert torch.equal(fuse_late(a, b, "add"), a + b)
    assert fuse_late(a, b, "concat").shape == (4,)
    with pytest.raises(ValueError, match="unknown"):
        fuse_late(a, b, "mean")


def test_sidecar_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    features = {f"s{i}": rng.standard_normal(16).astype(np.float32) for i in range(5)}
    index = write_feature_sidecar(features, tmp_path)
    det = SidecarDetector(index)
    assert det.feature_dim == 16
    for i in range(5):
        sample = Sample(f"s{i}", False, False, frozenset(), "g", "v", "a")
        np.testing.assert_array_equal(det.features(sample), features[f"s{i}"].astype(np.float64))
    with pytest.raises(KeyError):
        det.features(Sample("missing", False, False, frozenset(), "g", "v", "a"))


def trained_emotion_model(tmp_path, manifest):
    plan = make_in_domain_split(manifest, (0.6, 0.2, 0.2), seed=0)
    cfg = TrainConfig(max_epochs=1, batch_size=8, seed=0, model=tiny_transformer())
    result = train_emoforensics(manifest.subset(plan.train), manifest.subset(plan.val), cfg)
    return result.model, plan


def test_train_emoboost_freezes_everything_else(tmp_path):
    manifest = build_tiny_dataset(tmp_path, num_real=16, num_fake=16)
    model, plan = trained_emotion_model(tmp_path, manifest)
    model.save(tmp_path / "emotion_before.ckpt")
    model.zero_grad(set_to_none=True)
    detector = MockDetector(MockDetectorConfig(feature_dim=24, signal_strength=0.8, seed=2))
    cfg = EmoBoostConfig(max_epochs=3, batch_size=8, seed=7)
    result = train_emoboost(
        manifest.subset(plan.train), manifest.subset(plan.val), model, detector, cfg
    )
    model.save(tmp_path / "emotion_after.ckpt")
    assert checkpoint_hash(tmp_path / "emotion_before.ckpt") == checkpoint_hash(
        tmp_path / "emotion_after.ckpt"
    )
    assert all(p.grad is None for p in model.parameters())
    assert len(result.history) == 3
    # fusion heads round trip through the checkpoint format
    result.heads.save(tmp_path / "heads.ckpt")
    loaded = EmoBoostHeads.load(tmp_path / "heads.ckpt")
    emotion = np.random.default_rng(0).standard_normal((4, 32))
    feats = np.random.default_rng(1).standard_normal((4, 24))
    np.testing.assert_array_equal(loaded.scores(emotion, feats), result.heads.scores(emotion, feats))


def test_train_emoboost_zero_lr_keeps_heads(tmp_path):
    manifest = build_tiny_dataset(tmp_path, num_real=12, num_fake=12)
    model, plan = trained_emotion_model(tmp_path, manifest)
    detector = MockDetector(MockDetectorConfig(feature_dim=24, seed=2))
    cfg = EmoBoostConfig(max_epochs=3, batch_size=8, seed=7, learning_rate=0.0)
    result = train_emoboost(
        manifest.subset(plan.train), manifest.subset(plan.val), model, detector, cfg
    )
    result.heads.save(tmp_path / "trained.ckpt")
    fresh = EmoBoostHeads(32, 24, cfg, torch.Generator().manual_seed(7))
    fresh.save(tmp_path / "fresh.ckpt")
    assert checkpoint_hash(tmp_path / "trained.ckpt") == checkpoint_hash(tmp_path / "fresh.ckpt")


def test_emoboost_determinism(tmp_path):
    manifest = build_tiny_dataset(tmp_path, num_real=12, num_fake=12)
    model, plan = trained_emotion_model(tmp_path, manifest)
    detector = MockDetector(MockDetectorConfig(feature_dim=24, seed=2))
    cfg = EmoBoostConfig(max_epochs=2, batch_size=8, seed=9)
    for name in ("x", "y"):
        result = train_emoboost(
            manifest.subset(plan.train), manifest.subset(plan.val), model, detector, cfg
        )
        result.heads.save(tmp_path / f"{name}.ckpt")
    assert checkpoint_hash(tmp_path / "x.ckpt") == checkpoint_hash(tmp_path / "y.ckpt")
