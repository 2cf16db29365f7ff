import numpy as np
import pytest
import torch

from emoforensics.encoder import (
    AudioProjection,
    TemporalEncoder,
    TransformerConfig,
    dropout,
)
from emoforensics.gradcheck import gradient_check, torch_point_and_fns


def small_cfg(**kw):
    base = dict(depth=2, model_dim=16, num_heads=4, ffn_multiplier=2, max_seq_len=12)
    base.update(kw)
    return TransformerConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError, match="divisible"):
        TransformerConfig(model_dim=10, num_heads=4)
    with pytest.raises(ValueError, match="depth"):
        TransformerConfig(depth=0)


def test_project_audio_zero_params_gives_zero():
    g = torch.Generator().manual_seed(0)
    proj = AudioProjection(g, in_dim=8, out_dim=4)
    with torch.no_grad():
        proj.affine.weight.zero_()
        proj.affine.bias.zero_()
    out = proj(torch.randn(3, 8, dtype=torch.float64))
    assert torch.equal(out, torch.zeros(3, 4, dtype=torch.float64))


def test_project_audio_identity_block():
    g = torch.Generator().manual_seed(0)
    proj = AudioProjection(g, in_dim=8, out_dim=4)
    with torch.no_grad():
        proj.affine.weight.zero_()
        proj.affine.weight[:, :4] = torch.eye(4, dtype=torch.float64)
        proj.affine.bias.zero_()
    basis = torch.eye(8, dtype=torch.float64)[:4]  # rows e_0..e_3
    out = proj(basis)
    assert torch.equal(out, torch.eye(4, dtype=torch.float64))


def test_project_audio_matches_triple_loop_oracle():
    g = torch.Generator().manual_seed(3)
    proj = AudioProjection(g)  # full 1024 -> 512
    frames = torch.randn(3, 1024, dtype=torch.float64, generator=g)
    out = proj(frames).detach().numpy()
    weight = proj.affine.weight.detach().numpy()
    bias = proj.affine.bias.detach().numpy()
    x = frames.numpy()
    expected = np.empty((3, 512))
    for i in range(3):
        for j in range(512):
            acc = 0.0
            for k in range(1024):
                acc += x[i, k] * weight[j, k]
            expected[i, j] = acc + bias[j]
    assert np.abs(out - expected).max() < 1e-12


def test_project_audio_dimension_mismatch():
    proj = AudioProjection(torch.Generator().manual_seed(0), in_dim=8, out_dim=4)
    with pytest.raises(ValueError, match="last dim"):
        proj(torch.randn(2, 9, dtype=torch.float64))


def test_encode_deterministic_in_eval_mode():
    g = torch.Generator().manual_seed(1)
    enc = TemporalEncoder(small_cfg(), g)
    tokens = torch.randn(5, 16, dtype=torch.float64, generator=g)
    assert torch.equal(enc(tokens), enc(tokens))


def test_permutation_invariance_without_positions():
    g = torch.Generator().manual_seed(2)
    enc = TemporalEncoder(small_cfg(use_positional=False), g)
    tokens = torch.randn(7, 16, dtype=torch.float64, generator=g)
    perm = torch.randperm(7, generator=g)
    out_a = enc(tokens)
    out_b = enc(tokens[perm])
    assert torch.allclose(out_a, out_b, atol=1e-10, rtol=0)


def test_positions_break_order_invariance():
    g = torch.Generator().manual_seed(4)
    enc = TemporalEncoder(small_cfg(use_positional=True), g)
    tokens = torch.randn(2, 16, dtype=torch.float64, generator=g)
    diff = (enc(tokens) - enc(tokens.flip(0))).norm().detach()
    assert float(diff) > 1e-8


def test_attention_rows_are_probability_vectors():
    g = torch.Generator().manual_seed(5)
    enc = TemporalEncoder(small_cfg(), g)
    tokens = torch.randn(2, 6, 16, dtype=torch.float64, generator=g)
    _, attentions = enc(tokens, return_attention=True)
    assert len(attentions) == 2
    for attn in attentions:
        assert (attn >= 0).all()
        sums = attn.sum(dim=-1)
        assert torch.allclose(sums, torch.ones_like(sums), atol=1e-12, rtol=0)


def test_zero_dropout_training_equals_eval():
    g = torch.Generator().manual_seed(6)
    enc = TemporalEncoder(small_cfg(dropout_rate=0.0), g)
    tokens = torch.randn(4, 16, dtype=torch.float64, generator=g)
    train_out = enc(tokens, training=True, generator=torch.Generator().manual_seed(0))
    eval_out = enc(tokens, training=False)
    assert torch.equal(train_out, eval_out)


def test_dropout_masks_draw_from_generator():
    x = torch.ones(1000, dtype=torch.float64)
    out = dropout(x, 0.25, training=True, generator=torch.Generator().manual_seed(0))
    kept = (out != 0).to(torch.float64).mean()
    assert 0.65 < float(kept) < 0.85
    assert torch.allclose(out[out != 0], torch.full_like(out[out != 0], 1 / 0.75))
    with pytest.raises(ValueError, match="generator"):
        dropout(x, 0.25, training=True, generator=None)


def test_sequence_length_bounds():
    g = torch.Generator().manual_seed(7)
    enc = TemporalEncoder(small_cfg(max_seq_len=8), g)
    with pytest.raises(ValueError, match="length"):
        enc(torch.randn(9, 16, dtype=torch.float64))
    out = enc(torch.randn(1, 16, dtype=torch.float64))
    assert out.shape == (16,)


def test_output_dim_constant_across_lengths():
    g = torch.Generator().manual_seed(9)
    enc = TemporalEncoder(small_cfg(max_seq_len=10), g)
    for length in range(1, 11):
        out = enc(torch.randn(3, length, 16, dtype=torch.float64, generator=g))
        assert out.shape == (3, 16)


def test_encoder_gradient_check_small():
    g = torch.Generator().manual_seed(8)
    cfg = small_cfg(depth=1, max_seq_len=6)
    enc = TemporalEncoder(cfg, g)
    tokens = torch.randn(2, 4, 16, dtype=torch.float64, generator=g)
    readout = torch.randn(16, dtype=torch.float64, generator=g)

    def loss_fn():
        pooled = enc(tokens, training=False)
        return torch.sigmoid(pooled @ readout).sum()

    point, fn, value_fn = torch_point_and_fns(loss_fn, list(enc.parameters()))
    error = gradient_check(fn, point, eps=1e-5, max_coords=120, seed=0, value_fn=value_fn)
    assert error < 1e-4
