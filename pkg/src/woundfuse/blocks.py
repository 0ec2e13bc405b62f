"""Reusable differentiable blocks: ConvBlock, parallel squeeze-and-excitation,
axial attention, and the adaptive gated MLP used by the location branch."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Mapping, Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F


class BlockConfigError(ValueError):
    """Raised for invalid block configurations or input shapes."""


class ConvBlock(nn.Module):
    """Padding-preserving convolution followed by ReLU."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 3):
        super().__init__()
        if kernel_size % 2 == 0:
            raise BlockConfigError("kernel size must be odd to preserve spatial dims")
        self.conv = nn.Conv2d(in_channels, out_channels, kernel_size, padding=kernel_size // 2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != self.conv.in_channels:
            raise BlockConfigError(
                f"expected {self.conv.in_channels} input channels, got {x.shape[1]}"
            )
        return F.relu(self.conv(x))


class ChannelSE(nn.Module):
    """Channel squeeze-and-excitation: global pool -> bottleneck -> sigmoid gates."""

    def __init__(self, channels: int, reduction_ratio: int = 16):
        super().__init__()
        if reduction_ratio < 1:
            raise BlockConfigError(f"reduction_ratio must be >= 1, got {reduction_ratio}")
        if channels % reduction_ratio != 0:
            raise BlockConfigError(
                f"channels ({channels}) must be divisible by reduction_ratio ({reduction_ratio})"
            )
        hidden = channels // reduction_ratio
        self.fc1 = nn.Linear(channels, hidden)
        self.fc2 = nn.Linear(hidden, channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, c = x.shape[:2]
        pooled = x.mean(dim=(2, 3))
        gates = torch.sigmoid(self.fc2(F.relu(self.fc1(pooled))))
        return x * gates.view(b, c, 1, 1)


class SpatialSE(nn.Module):
    """Spatial squeeze-and-excitation: 1x1 projection -> per-position sigmoid gates."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv = nn.Conv2d(channels, 1, kernel_size=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x * torch.sigmoid(self.conv(x))


COMBINE_MODES = ("maxout_plus_add", "add", "max")


@dataclass
class PscseConfig:
    channels: int
    reduction_ratio: int = 16
    combine_mode: str = "maxout_plus_add"

    def validate(self) -> None:
        if self.reduction_ratio < 1:
            raise BlockConfigError(f"reduction_ratio must be >= 1, got {self.reduction_ratio}")
        if self.channels % self.reduction_ratio != 0:
            raise BlockConfigError(
                f"channels ({self.channels}) must be divisible by reduction_ratio ({self.reduction_ratio})"
            )
        if self.combine_mode not in COMBINE_MODES:
            raise BlockConfigError(f"combine_mode must be one of {COMBINE_MODES}, got {self.combine_mode!r}")


class PscSE(nn.Module):
    """Parallel cSE/sSE block; branches merged by addition plus elementwise max-out."""

    def __init__(self, cfg: PscseConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        self.cse = ChannelSE(cfg.channels, cfg.reduction_ratio)
        self.sse = SpatialSE(cfg.channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != self.cfg.channels:
            raise BlockConfigError(f"expected {self.cfg.channels} channels, got {x.shape[1]}")
        c = self.cse(x)
        s = self.sse(x)
        if self.cfg.combine_mode == "add":
            return c + s
        if self.cfg.combine_mode == "max":
            return torch.maximum(c, s)
        return (c + s) + torch.maximum(c, s)


@dataclass
class AxialAttentionConfig:
    embed_dim: int
    heads: int = 1
    axes: tuple[str, ...] = ("tokens",)

    def validate(self) -> None:
        if self.embed_dim < 1 or self.heads < 1:
            raise BlockConfigError("embed_dim and heads must be >= 1")
        if self.embed_dim % self.heads != 0:
            raise BlockConfigError(
                f"embed_dim ({self.embed_dim}) must be divisible by heads ({self.heads})"
            )
        if not self.axes:
            raise BlockConfigError("axes must name at least one dimension")

    def to_dict(self) -> dict:
        return {"embed_dim": self.embed_dim, "heads": self.heads, "axes": list(self.axes)}

    @classmethod
    def from_dict(cls, data: Mapping) -> "AxialAttentionConfig":
        cfg = cls(
            embed_dim=int(data["embed_dim"]),
            heads=int(data.get("heads", 1)),
            axes=tuple(data.get("axes", ("tokens",))),
        )
        cfg.validate()
        return cfg


class _AxisAttention(nn.Module):
    """Multi-head self-attention along one axis of the input."""

    def __init__(self, embed_dim: int, heads: int):
        super().__init__()
        self.embed_dim = embed_dim
        self.heads = heads
        self.head_dim = embed_dim // heads
        self.q_proj = nn.Linear(embed_dim, embed_dim)
        self.k_proj = nn.Linear(embed_dim, embed_dim)
        self.v_proj = nn.Linear(embed_dim, embed_dim)
        self.out_proj = nn.Linear(embed_dim, embed_dim)

    def forward(self, x: torch.Tensor, return_weights: bool = False):
        # x: (batch, length, embed_dim)
        b, length, _ = x.shape
        q = self.q_proj(x).view(b, length, self.heads, self.head_dim).transpose(1, 2)
        k = self.k_proj(x).view(b, length, self.heads, self.head_dim).transpose(1, 2)
        v = self.v_proj(x).view(b, length, self.heads, self.head_dim).transpose(1, 2)
        scores = torch.matmul(q, k.transpose(-2, -1)) / (self.head_dim**0.5)
        weights = torch.softmax(scores, dim=-1)
        mixed = torch.matmul(weights, v)
        out = self.out_proj(mixed.transpose(1, 2).reshape(b, length, self.embed_dim))
        if return_weights:
            return out, weights
        return out


class AxialAttention(nn.Module):
    """Attention applied independently along each configured axis.

    Input layout is ``(batch, *axes, embed_dim)`` with one named axis per
    middle dimension; the axes are attended in configuration order. Attention
    weight rows are row-stochastic along every axis.
    """

    def __init__(self, cfg: AxialAttentionConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        self.axis_attention = nn.ModuleList(
            _AxisAttention(cfg.embed_dim, cfg.heads) for _ in cfg.axes
        )

    def forward(self, x: torch.Tensor, return_weights: bool = False):
        cfg = self.cfg
        expected_ndim = 2 + len(cfg.axes)
        if x.ndim != expected_ndim:
            raise BlockConfigError(
                f"expected {expected_ndim}-d input (batch, {', '.join(cfg.axes)}, embed), got {x.ndim}-d"
            )
        if x.shape[-1] != cfg.embed_dim:
            raise BlockConfigError(f"trailing dim must equal embed_dim {cfg.embed_dim}, got {x.shape[-1]}")
        all_weights = []
        out = x
        for axis_index, attention in enumerate(self.axis_attention):
            dim = 1 + axis_index
            moved = torch.movedim(out, dim, -2)
            lead_shape = moved.shape[:-2]
            length = moved.shape[-2]
            flat = moved.reshape(-1, length, cfg.embed_dim)
            if return_weights:
                flat, weights = attention(flat, return_weights=True)
                all_weights.append(weights.reshape(*lead_shape, cfg.heads, length, length))
            else:
                flat = attention(flat)
            out = torch.movedim(flat.reshape(*lead_shape, length, cfg.embed_dim), -2, dim)
        if return_weights:
            return out, all_weights
        return out


@dataclass
class GatedMlpConfig:
    """Location branch: linear / axial-attention / ReLU stages, sigmoid-gated.

    Each hidden activation of width ``h`` is viewed as a sequence of
    ``h / attention_embed_dim`` tokens for its axial-attention pass.
    """

    input_dim: int
    hidden_dims: tuple[int, ...] = (256, 128)
    output_dim: int = 64
    attention_embed_dim: int = 1
    attention_heads: int = 1

    def validate(self) -> None:
        if self.input_dim < 1 or self.output_dim < 1:
            raise BlockConfigError("input_dim and output_dim must be >= 1")
        if not self.hidden_dims or any(h < 1 for h in self.hidden_dims):
            raise BlockConfigError("hidden_dims must be a nonempty list of positive widths")
        if self.attention_embed_dim < 1:
            raise BlockConfigError("attention_embed_dim must be >= 1")
        if self.attention_embed_dim % self.attention_heads != 0:
            raise BlockConfigError("attention_embed_dim must be divisible by attention_heads")
        for h in self.hidden_dims:
            if h % self.attention_embed_dim != 0:
                raise BlockConfigError(
                    f"hidden width {h} must be divisible by attention_embed_dim {self.attention_embed_dim}"
                )

    def to_dict(self) -> dict:
        data = asdict(self)
        data["hidden_dims"] = list(self.hidden_dims)
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "GatedMlpConfig":
        cfg = cls(
            input_dim=int(data["input_dim"]),
            hidden_dims=tuple(int(h) for h in data.get("hidden_dims", (256, 128))),
            output_dim=int(data.get("output_dim", 64)),
            attention_embed_dim=int(data.get("attention_embed_dim", 1)),
            attention_heads=int(data.get("attention_heads", 1)),
        )
        cfg.validate()
        return cfg


class _GatedStage(nn.Module):
    """One hidden stage: g = sigmoid(gate(h)); f = ReLU(axial(linear(h))); out = g * f."""

    def __init__(self, in_dim: int, out_dim: int, attention_embed_dim: int, attention_heads: int):
        super().__init__()
        self.linear = nn.Linear(in_dim, out_dim)
        self.gate = nn.Linear(in_dim, out_dim)
        self.attention = AxialAttention(
            AxialAttentionConfig(embed_dim=attention_embed_dim, heads=attention_heads, axes=("tokens",))
        )
        self.tokens = out_dim // attention_embed_dim
        self.embed = attention_embed_dim
        # Start the attention path with a slightly positive output bias and no
        # value bias. At init the attention weights are near-uniform, so every
        # token lands close to one shared constant; if that constant were
        # negative (the value/output biases draw at +-1 scale when embed_dim
        # is 1) the ReLU would zero the stage's output and gradients for good.
        for axis_attention in self.attention.axis_attention:
            nn.init.zeros_(axis_attention.v_proj.bias)
            nn.init.constant_(axis_attention.out_proj.bias, 0.1)

    def ungated(self, h: torch.Tensor) -> torch.Tensor:
        b = h.shape[0]
        z = self.linear(h).view(b, self.tokens, self.embed)
        z = self.attention(z).reshape(b, -1)
        return F.relu(z)

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.gate(h)) * self.ungated(h)


class AdaptiveGatedMlp(nn.Module):
    """Gated MLP over one-hot location vectors, producing a location embedding."""

    def __init__(self, cfg: GatedMlpConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        stages = []
        prev = cfg.input_dim
        for width in cfg.hidden_dims:
            stages.append(_GatedStage(prev, width, cfg.attention_embed_dim, cfg.attention_heads))
            prev = width
        self.stages = nn.ModuleList(stages)
        self.out = nn.Linear(prev, cfg.output_dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 2 or x.shape[1] != self.cfg.input_dim:
            raise BlockConfigError(
                f"expected input of shape (batch, {self.cfg.input_dim}), got {tuple(x.shape)}"
            )
        h = x
        for stage in self.stages:
            h = stage(h)
        return self.out(h)
