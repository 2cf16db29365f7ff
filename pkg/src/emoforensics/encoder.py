"""Modality-specific temporal encoder.

A stack of pre-norm multi-head self-attention blocks over frame tokens, with
a learnable classification token prepended and a learnable positional table
added (row 0 belongs to the classification token). The pooled modality
representation is the classification token's output after the final block.

Everything runs in float64: the models are tiny and the training contract is
a 1e-4 finite-difference gradient match, which float32 cannot honor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

DTYPE = torch.float64

AUDIO_INPUT_DIM = 1024
MODEL_DIM = 512


@dataclass
class TransformerConfig:
    depth: int = 2
    model_dim: int = MODEL_DIM
    num_heads: int = 8
    ffn_multiplier: int = 4
    dropout_rate: float = 0.15
    max_seq_len: int = 64
    use_positional: bool = True

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.model_dim % self.num_heads != 0:
            raise ValueError(f"model_dim {self.model_dim} not divisible by num_heads {self.num_heads}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")

    def to_json(self) -> dict:
        return {
            "depth": self.depth,
            "model_dim": self.model_dim,
            "num_heads": self.num_heads,
            "ffn_multiplier": self.ffn_multiplier,
            "dropout_rate": self.dropout_rate,
            "max_seq_len": self.max_seq_len,
            "use_positional": self.use_positional,
        }


def glorot(shape: tuple[int, int], generator: torch.Generator) -> torch.Tensor:
    fan_out, fan_in = shape
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return (torch.rand(shape, generator=generator, dtype=DTYPE) * 2.0 - 1.0) * limit


def dropout(
    x: torch.Tensor, rate: float, training: bool, generator: torch.Generator | None
) -> torch.Tensor:
    """Inverted dropout; identity when not training or rate == 0."""
    if not training or rate == 0.0:
        return x
    if generator is None:
        raise ValueError("training-mode dropout needs a generator")
    mask = (torch.rand(x.shape, generator=generator, dtype=DTYPE) >= rate).to(DTYPE)
    return x * mask / (1.0 - rate)


class Affine(nn.Module):
    """Row-wise affine map ``x @ W.T + b`` with Glorot/zero init."""

    def __init__(self, in_dim: int, out_dim: int, generator: torch.Generator):
        super().__init__()
        self.weight = nn.Parameter(glorot((out_dim, in_dim), generator))
        self.bias = nn.Parameter(torch.zeros(out_dim, dtype=DTYPE))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x @ self.weight.T + self.bias


class AudioProjection(nn.Module):
    """Projects 1024-d audio emotion frames into the shared 512-d space."""

    def __init__(self, generator: torch.Generator, in_dim: int = AUDIO_INPUT_DIM, out_dim: int = MODEL_DIM):
        super().__init__()
        self.in_dim = in_dim
        self.affine = Affine(in_dim, out_dim, generator)

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        if frames.shape[-1] != self.in_dim:
            raise ValueError(f"expected last dim {self.in_dim}, got {frames.shape[-1]}")
        return self.affine(frames)


class LayerNorm(nn.Module):
    def __init__(self, dim: int, eps: float = 1e-12):
        super().__init__()
        self.scale = nn.Parameter(torch.ones(dim, dtype=DTYPE))
        self.offset = nn.Parameter(torch.zeros(dim, dtype=DTYPE))
        self.eps = eps

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        mean = x.mean(dim=-1, keepdim=True)
        var = x.var(dim=-1, unbiased=False, keepdim=True)
        return (x - mean) / torch.sqrt(var + self.eps) * self.scale + self.offset


class MultiHeadSelfAttention(nn.Module):
    def __init__(self, cfg: TransformerConfig, generator: torch.Generator):
        super().__init__()
        self.num_heads = cfg.num_heads
        self.head_dim = cfg.model_dim // cfg.num_heads
        self.query = Affine(cfg.model_dim, cfg.model_dim, generator)
        self.key = Affine(cfg.model_dim, cfg.model_dim, generator)
        self.value = Affine(cfg.model_dim, cfg.model_dim, generator)
        self.out = Affine(cfg.model_dim, cfg.model_dim, generator)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns ``(output, attention)``; attention is (B, H, T, T)."""
        batch, length, dim = x.shape
        def split(t: torch.Tensor) -> torch.Tensor:
            return t.view(batch, length, self.num_heads, self.head_dim).transpose(1, 2)
        q, k, v = split(self.query(x)), split(self.key(x)), split(self.value(x))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        attn = torch.softmax(scores, dim=-1)
        pooled = (attn @ v).transpose(1, 2).reshape(batch, length, dim)
        return self.out(pooled), attn


class EncoderBlock(nn.Module):
    """Pre-norm block: attention and GELU feed-forward, each residual."""

    def __init__(self, cfg: TransformerConfig, generator: torch.Generator):
        super().__init__()
        self.norm_attn = LayerNorm(cfg.model_dim)
        self.attn = MultiHeadSelfAttention(cfg, generator)
        self.norm_ffn = LayerNorm(cfg.model_dim)
        self.ffn_in = Affine(cfg.model_dim, cfg.ffn_multiplier * cfg.model_dim, generator)
        self.ffn_out = Affine(cfg.ffn_multiplier * cfg.model_dim, cfg.model_dim, generator)
        self.rate = cfg.dropout_rate

    def forward(
        self, x: torch.Tensor, training: bool, generator: torch.Generator | None
    ) -> tuple[torch.Tensor, torch.Tensor]:
        attn_out, attn = self.attn(self.norm_attn(x))
        x = x + dropout(attn_out, self.rate, training, generator)
        ffn_out = self.ffn_out(torch.nn.functional.gelu(self.ffn_in(self.norm_ffn(x))))
        x = x + dropout(ffn_out, self.rate, training, generator)
        return x, attn


class TemporalEncoder(nn.Module):
    """Frame tokens (B, T, model_dim) -> pooled representation (B, model_dim)."""

    def __init__(self, cfg: TransformerConfig, generator: torch.Generator):
        super().__init__()
        self.cfg = cfg
        self.cls_token = nn.Parameter(
            torch.randn(cfg.model_dim, generator=generator, dtype=DTYPE) * 0.02
        )
        self.positional = nn.Parameter(
            torch.randn(cfg.max_seq_len + 1, cfg.model_dim, generator=generator, dtype=DTYPE) * 0.02
        )
        self.blocks = nn.ModuleList(EncoderBlock(cfg, generator) for _ in range(cfg.depth))
        self.norm_final = LayerNorm(cfg.model_dim)

    def forward(
        self,
        tokens: torch.Tensor,
        training: bool = False,
        generator: torch.Generator | None = None,
        return_attention: bool = False,
    ):
        squeeze = tokens.dim() == 2
        if squeeze:
            tokens = tokens.unsqueeze(0)
        batch, length, dim = tokens.shape
        if dim != self.cfg.model_dim:
            raise ValueError(f"expected token dim {self.cfg.model_dim}, got {dim}")
        if not 1 <= length <= self.cfg.max_seq_len:
            raise ValueError(f"sequence length {length} outside [1, {self.cfg.max_seq_len}]")
        x = torch.cat([self.cls_token.expand(batch, 1, dim), tokens], dim=1)
        if self.cfg.use_positional:
            x = x + self.positional[: length + 1]
        attentions = []
        for block in self.blocks:
            x, attn = block(x, training, generator)
            if return_attention:
                attentions.append(attn)
        pooled = self.norm_final(x)[:, 0, :]
        if not torch.isfinite(pooled).all():
            raise FloatingPointError("non-finite value in encoder output")
        if squeeze:
            pooled = pooled.squeeze(0)
        return (pooled, attentions) if return_attention else pooled
