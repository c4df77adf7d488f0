"""Lightweight semantic encoder/decoder built from factorized conv blocks.

Each SemBlock expands channels with a 1x1 conv, applies a 3x3 kernel split
into depthwise 1x3 and 3x1 convolutions, gates channels with a squeeze-style
attention layer, projects back with a 1x1 conv, and adds a shortcut path, so
a block is strictly cheaper than a full 3x3 convolution at equal widths.

The encoder maps an image in [-1, 1] to a flat latent of fixed dimension;
the decoder inverts the spatial chain and ends in a sigmoid so every output
pixel lies in (0, 1).
"""

import math
from dataclasses import dataclass

import torch
from torch import nn

from .errors import ConfigError, ShapeError

LATENT_DIM = 1134
ENCODER_WIDTHS = (24, 48, 96, 96)
TAIL_CHANNELS = 32


@dataclass(frozen=True)
class SemBlockConfig:
    in_channels: int
    out_channels: int
    stride: int = 1
    attention_enabled: bool = True
    expansion: int = 2
    attention_reduction: int = 8

    def __post_init__(self):
        if self.in_channels < 1 or self.out_channels < 1:
            raise ConfigError("channel counts must be >= 1")
        if self.stride not in (1, 2):
            raise ConfigError(f"stride must be 1 or 2, got {self.stride}")


class ChannelAttention(nn.Module):
    """Global-average-pool bottleneck gate over channels."""

    def __init__(self, channels, reduction=8):
        super().__init__()
        hidden = max(channels // reduction, 4)
        self.squeeze = nn.AdaptiveAvgPool2d(1)
        self.gate = nn.Sequential(
            nn.Conv2d(channels, hidden, 1),
            nn.ReLU(inplace=True),
            nn.Conv2d(hidden, channels, 1),
            nn.Sigmoid(),
        )

    def forward(self, x):
        return x * self.gate(self.squeeze(x))


class SemBlock(nn.Module):
    """Expansion + split depthwise 3x3 + attention + projection + shortcut."""

    def __init__(self, cfg: SemBlockConfig):
        super().__init__()
        self.cfg = cfg
        hidden = cfg.expansion * cfg.in_channels
        self.expand = nn.Conv2d(cfg.in_channels, hidden, 1)
        self.act = nn.PReLU(hidden)
        self.dw_row = nn.Conv2d(
            hidden, hidden, (1, 3), stride=(1, cfg.stride), padding=(0, 1),
            groups=hidden,
        )
        self.dw_col = nn.Conv2d(
            hidden, hidden, (3, 1), stride=(cfg.stride, 1), padding=(1, 0),
            groups=hidden,
        )
        self.attention = (
            ChannelAttention(hidden, cfg.attention_reduction)
            if cfg.attention_enabled else nn.Identity()
        )
        self.project = nn.Conv2d(hidden, cfg.out_channels, 1)
        if cfg.stride == 1 and cfg.in_channels == cfg.out_channels:
            self.shortcut = nn.Identity()
        else:
            self.shortcut = nn.Conv2d(
                cfg.in_channels, cfg.out_channels, 1, stride=cfg.stride,
            )

    def forward(self, x):
        if x.shape[1] != self.cfg.in_channels:
            raise ShapeError(
                f"block expects {self.cfg.in_channels} channels, got {x.shape[1]}"
            )
        h = self.act(self.expand(x))
        h = self.dw_col(self.dw_row(h))
        h = self.attention(h)
        return self.project(h) + self.shortcut(x)


def sem_block(feature_map, cfg: SemBlockConfig):
    """Apply a freshly initialized SemBlock; mainly a shape/contract helper."""
    return SemBlock(cfg)(feature_map)


def _halved(size):
    return math.ceil(size / 2)


def _spatial_chain(h, w):
    """Spatial sizes after the encoder's three stride-2 blocks."""
    sizes = [(h, w)]
    for _ in range(3):
        h, w = _halved(h), _halved(w)
        sizes.append((h, w))
    return sizes


class SemanticEncoder(nn.Module):
    """Image in [-1, 1] -> flat latent of dimension `latent_dim`."""

    def __init__(self, image_shape, latent_dim=LATENT_DIM,
                 widths=ENCODER_WIDTHS, tail_channels=TAIL_CHANNELS):
        super().__init__()
        if latent_dim % 2 != 0:
            raise ConfigError(f"latent_dim must be even, got {latent_dim}")
        c, h, w = image_shape
        self.image_shape = tuple(image_shape)
        self.latent_dim = latent_dim
        w0, w1, w2, w3 = widths
        self.stem = nn.Sequential(nn.Conv2d(c, w0, 3, padding=1), nn.PReLU(w0))
        self.blocks = nn.Sequential(
            SemBlock(SemBlockConfig(w0, w1, stride=2)),
            SemBlock(SemBlockConfig(w1, w2, stride=2)),
            SemBlock(SemBlockConfig(w2, w3, stride=1)),
            SemBlock(SemBlockConfig(w3, w3, stride=2)),
        )
        self.tail = nn.Sequential(nn.Conv2d(w3, tail_channels, 1), nn.PReLU(tail_channels))
        fh, fw = _spatial_chain(h, w)[-1]
        self.flat_dim = tail_channels * fh * fw
        self.fc = nn.Linear(self.flat_dim, latent_dim)

    def forward(self, image):
        single = image.ndim == 3
        if single:
            image = image.unsqueeze(0)
        if tuple(image.shape[1:]) != self.image_shape:
            raise ShapeError(
                f"expected image shape {self.image_shape}, got {tuple(image.shape[1:])}"
            )
        h = self.tail(self.blocks(self.stem(image)))
        latent = self.fc(h.flatten(1))
        return latent.squeeze(0) if single else latent


class SemanticDecoder(nn.Module):
    """Flat latent -> image in (0, 1), mirroring the encoder's spatial chain."""

    def __init__(self, image_shape, latent_dim=LATENT_DIM,
                 widths=ENCODER_WIDTHS, tail_channels=TAIL_CHANNELS):
        super().__init__()
        c, h, w = image_shape
        self.image_shape = tuple(image_shape)
        self.latent_dim = latent_dim
        w0, w1, w2, w3 = widths
        sizes = _spatial_chain(h, w)
        self.seed_size = sizes[-1]
        self.up_sizes = [sizes[2], sizes[1], sizes[0]]
        self.flat_dim = tail_channels * self.seed_size[0] * self.seed_size[1]
        self.fc = nn.Linear(latent_dim, self.flat_dim)
        self.head = nn.Sequential(nn.Conv2d(tail_channels, w3, 1), nn.PReLU(w3))
        self.block0 = SemBlock(SemBlockConfig(w3, w3, stride=1))
        self.block1 = SemBlock(SemBlockConfig(w3, w2, stride=1))
        self.block2 = SemBlock(SemBlockConfig(w2, w1, stride=1))
        self.block3 = SemBlock(SemBlockConfig(w1, w0, stride=1))
        self.tail = nn.Conv2d(w0, c, 3, padding=1)
        self._seed_channels = tail_channels

    def forward(self, latent):
        single = latent.ndim == 1
        if single:
            latent = latent.unsqueeze(0)
        if latent.shape[-1] != self.latent_dim:
            raise ShapeError(
                f"expected latent dim {self.latent_dim}, got {latent.shape[-1]}"
            )
        h = self.fc(latent).reshape(
            -1, self._seed_channels, self.seed_size[0], self.seed_size[1]
        )
        h = self.block0(self.head(h))
        for block, size in zip(
            (self.block1, self.block2, self.block3), self.up_sizes
        ):
            h = nn.functional.interpolate(h, size=size, mode="nearest")
            h = block(h)
        image = torch.sigmoid(self.tail(h))
        return image.squeeze(0) if single else image


def build_codec(image_shape, latent_dim=LATENT_DIM, widths=ENCODER_WIDTHS,
                tail_channels=TAIL_CHANNELS):
    encoder = SemanticEncoder(image_shape, latent_dim, widths, tail_channels)
    decoder = SemanticDecoder(image_shape, latent_dim, widths, tail_channels)
    return encoder, decoder


def param_count(module):
    """Exact number of trainable scalar parameters."""
    if module is None:
        return 0
    if isinstance(module, nn.Module):
        params = (p for p in module.parameters() if p.requires_grad)
    else:
        params = module
    return sum(p.numel() for p in params)
