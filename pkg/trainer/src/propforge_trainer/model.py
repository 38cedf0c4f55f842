"""Residual encoder-decoder producing a single-channel sigmoid heatmap.

The encoder halves the resolution ``stages`` times while multiplying the
channel count by ``expansion``; ``blocks`` stride-preserving residual
blocks sit at the bottleneck; the decoder mirrors the encoder with
transposed convolutions back to full resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn


@dataclass(frozen=True)
class NetConfig:
    base: int = 16              # channels after the stem
    stages: int = 2             # stride-2 encoder (and decoder) stages
    blocks: int = 2             # residual blocks at the bottleneck
    expansion: int = 2          # channel multiplier per stage
    head_bias: float = -3.0     # sigmoid starts near the background level

    def channels(self) -> list:
        return [self.base * self.expansion ** i
                for i in range(self.stages + 1)]

    @classmethod
    def full_scale(cls) -> "NetConfig":
        return cls(base=32, stages=2, blocks=8)


def conv3(cin: int, cout: int, stride: int = 1) -> nn.Conv2d:
    return nn.Conv2d(cin, cout, 3, stride=stride, padding=1, bias=False)


class ResBlock(nn.Module):
    """conv-bn-relu-conv-bn with a (projected) skip; stride 2 downsamples."""

    def __init__(self, cin: int, cout: int, stride: int = 1):
        super().__init__()
        self.conv1 = conv3(cin, cout, stride)
        self.bn1 = nn.BatchNorm2d(cout)
        self.conv2 = conv3(cout, cout)
        self.bn2 = nn.BatchNorm2d(cout)
        if stride == 1 and cin == cout:
            self.skip = nn.Identity()
        else:
            self.skip = nn.Sequential(
                nn.Conv2d(cin, cout, 1, stride=stride, bias=False),
                nn.BatchNorm2d(cout))
        self.act = nn.ReLU(inplace=True)

    def forward(self, x):
        h = self.act(self.bn1(self.conv1(x)))
        h = self.bn2(self.conv2(h))
        return self.act(h + self.skip(x))


class UpBlock(nn.Module):
    """Transposed-conv 2x upsampling with a projected-upsample skip."""

    def __init__(self, cin: int, cout: int):
        super().__init__()
        self.up = nn.ConvTranspose2d(cin, cout, 4, stride=2, padding=1,
                                     bias=False)
        self.bn1 = nn.BatchNorm2d(cout)
        self.conv = conv3(cout, cout)
        self.bn2 = nn.BatchNorm2d(cout)
        self.skip = nn.Sequential(
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(cin, cout, 1, bias=False),
            nn.BatchNorm2d(cout))
        self.act = nn.ReLU(inplace=True)

    def forward(self, x):
        h = self.act(self.bn1(self.up(x)))
        h = self.bn2(self.conv(h))
        return self.act(h + self.skip(x))


class HeatmapNet(nn.Module):
    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        ch = cfg.channels()
        self.stem = nn.Sequential(conv3(1, ch[0]), nn.BatchNorm2d(ch[0]),
                                  nn.ReLU(inplace=True))
        self.encoder = nn.Sequential(*[
            ResBlock(ch[i], ch[i + 1], stride=2) for i in range(cfg.stages)])
        self.bottleneck = nn.Sequential(*[
            ResBlock(ch[-1], ch[-1]) for _ in range(cfg.blocks)])
        self.decoder = nn.Sequential(*[
            UpBlock(ch[i + 1], ch[i]) for i in reversed(range(cfg.stages))])
        self.head = nn.Conv2d(ch[0], 1, 3, padding=1)
        nn.init.constant_(self.head.bias, cfg.head_bias)

    def forward(self, x):
        h = self.stem(x)
        h = self.encoder(h)
        h = self.bottleneck(h)
        h = self.decoder(h)
        return torch.sigmoid(self.head(h))


def build_model(cfg: NetConfig = None, seed: int = 0) -> HeatmapNet:
    """Seed-deterministic construction: same (cfg, seed) -> same weights."""
    cfg = cfg or NetConfig()
    if cfg.base < 1 or cfg.stages < 1 or cfg.blocks < 0 or cfg.expansion < 1:
        raise ValueError("invalid network configuration")
    torch.manual_seed(seed)
    return HeatmapNet(cfg)


def count_params(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
