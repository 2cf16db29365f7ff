import numpy as np
import pytest
import torch

from conftest import tiny_transformer
from emoforensics.model import EmoForensicsModel, fuse_modalities


def t(*values):
    return torch.tensor(values, dtype=torch.float64)


def make_model(**kw):
    cfg_kw = {}
    model_cfg = tiny_transformer()
    for key, value in kw.items():
        setattr(model_cfg, key, value)
    return EmoForensicsModel(model_cfg, torch.Generator().manual_seed(0))


def test_fusion_add_identity():
    h_v = t(1.0, -2.0, 3.0)
    assert torch.equal(fuse_modalities(h_v, torch.zeros(3, dtype=torch.float64), "add"), h_v)


def test_fusion_product_identity():
    h_v = t(1.0, -2.0, 3.0)
    ones = torch.ones(3, dtype=torch.float64)
    assert torch.equal(fuse_modalities(h_v, ones, "product"), h_v)


def test_fusion_concat_layout():
    h_v, h_a = t(1.0, 2.0), t(3.0, 4.0)
    out = fuse_modalities(h_v, h_a, "concat")
    assert out.shape == (4,)
    assert torch.equal(out[:2], h_v)


def test_fusion_symmetry():
    g = torch.Generator().manual_seed(0)
    h_v = torch.randn(8, dtype=torch.float64, generator=g)
    h_a = torch.randn(8, dtype=torch.float64, generator=g)
    assert torch.equal(fuse_modalities(h_v, h_a, "add"), fuse_modalities(h_a, h_v, "add"))
    assert torch.equal(fuse_modalities(h_v, h_a, "product"), fuse_modalities(h_a, h_v, "product"))
    assert not torch.equal(fuse_modalities(h_v, h_a, "concat"), fuse_modalities(h_a, h_v, "concat"))


def test_classifier_zero_head_gives_half():
    model = make_model()
    with torch.no_grad():
        model.head.weight.zero_()
        model.head.bias.zero_()
    joint = torch.randn(1, 32, dtype=torch.float64)
    logit = model.head(joint).squeeze(-1).detach()
    assert float(torch.sigmoid(logit)) == 0.5


def test_classifier_saturated_bias():
    model = make_model()
    with torch.no_grad():
        model.head.weight.zero_()
        model.head.bias.fill_(10.0)
    logit = model.head(torch.randn(1, 32, dtype=torch.float64)).squeeze(-1).detach()
    assert float(torch.sigmoid(logit)) > 0.9999


def test_classifier_matches_dot_product_oracle():
    model = make_model()
    joint = torch.randn(5, 32, dtype=torch.float64)
    logits = model.head(joint).squeeze(-1).detach().numpy()
    w = model.head.weight.detach().numpy()[0]
    b = float(model.head.bias.detach()[0])
    expected = joint.numpy() @ w + b
    assert np.abs(1 / (1 + np.exp(-logits)) - 1 / (1 + np.exp(-expected))).max() < 1e-12


def test_predict_sample_deterministic(tiny_dataset):
    model = make_model()
    sample = tiny_dataset.samples[0]
    a = model.predict_sample(tiny_dataset, sample)
    b = model.predict_sample(tiny_dataset, sample)
    assert a.probability == b.probability
    assert np.array_equal(a.joint_repr, b.joint_repr)
    assert a.probability == pytest.approx(1 / (1 + np.exp(-a.logit)))


def test_transformer_free_constant_video_equals_frame(tmp_path):
    from emoforensics.embeddings import EmbeddingSequence, Modality, write_embedding_file
    from emoforensics.manifest import DatasetManifest, Sample

    frame = np.linspace(-1, 1, 32, dtype=np.float32)
    video = np.tile(frame, (6, 1))
    rng = np.random.default_rng(0)
    audio = rng.standard_normal((12, 48)).astype(np.float32)
    write_embedding_file(EmbeddingSequence(Modality.VIDEO, video, "c"), tmp_path / "c_v.emb")
    write_embedding_file(EmbeddingSequence(Modality.AUDIO, audio, "c"), tmp_path / "c_a.emb")
    manifest = DatasetManifest(
        samples=[Sample("c", False, False, frozenset(), "c", "c_v.emb", "c_a.emb")],
        base_dir=tmp_path,
    )
    model = make_model(disable_temporal_transformers=True)
    video_t, audio_t = model.load_sample_tensors(manifest, manifest.samples[0])
    h_v = model.encode_video(video_t.unsqueeze(0))[0]
    np.testing.assert_allclose(h_v.numpy(), frame.astype(np.float64), atol=1e-12)
    # audio side of the transformer-free path still goes through the projection
    h_a = model.encode_audio(audio_t.unsqueeze(0))[0].detach()
    expected = model.audio_proj(audio_t.mean(dim=0)).detach()
    np.testing.assert_allclose(h_a.numpy(), expected.numpy(), atol=1e-12)


def test_video_only_ignores_audio_file(tmp_path, tiny_dataset):
    model = make_model(modality="video_only")
    sample = tiny_dataset.samples[0]
    before = model.predict_sample(tiny_dataset, sample)
    audio_file = tiny_dataset.audio_file(sample)
    audio_file.write_bytes(b"garbage that is not an embedding file")
    after = model.predict_sample(tiny_dataset, sample)
    assert before.probability == after.probability


def test_modality_target_labels(tiny_dataset):
    from emoforensics.manifest import Sample

    mixed = Sample("m", True, False, frozenset(["x"]), "m", "v", "a")
    assert make_model().target_label(mixed) == 1
    assert make_model(modality="video_only").target_label(mixed) == 1
    assert make_model(modality="audio_only").target_label(mixed) == 0


def test_checkpoint_round_trip(tmp_path, tiny_dataset):
    model = make_model(fusion_strategy="concat")
    path = tmp_path / "model.ckpt"
    model.save(path)
    loaded = EmoForensicsModel.load(path)
    assert loaded.cfg.fusion_strategy == "concat"
    sample = tiny_dataset.samples[2]
    assert (
        loaded.predict_sample(tiny_dataset, sample).probability
        == model.predict_sample(tiny_dataset, sample).probability
    )


def test_forward_batch_requires_streams():
    model = make_model()
    with pytest.raises(ValueError, match="video"):
        model.forward_batch(None, torch.randn(1, 4, 48, dtype=torch.float64))
