# Folder: platter/pl_core/block_2_model
# File:   b2f1_networks.py

from __future__ import annotations

import hashlib
import json
import math
from typing import List, Optional

import torch
import torch.nn as nn
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict, Field, field_validator
from torch.nn.utils.parametrizations import spectral_norm

from pl_core.block_1_data.b1f0_dataset import check_image_size

__all__ = ["ModelConfig", "Encoder", "Generator", "Discriminator", "halvings", "FEATURE_SIZE"]

FEATURE_SIZE = 16
MAX_ENCODER_BLOCKS = 3


def halvings(image_size: int) -> int:
    """Number of exact halvings from image_size down to the 16×16 feature grid (rounded up)."""
    n = 0
    while FEATURE_SIZE * (2 ** n) < image_size:
        n += 1
    return n


class ModelConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    image_size: int = 256
    num_categories: Optional[int] = Field(None, ge=1)
    latent_dim: int = Field(128, ge=1)
    feature_channels: int = Field(128, ge=1)
    base_channels: int = Field(64, ge=1)
    max_channels: int = Field(512, ge=1)
    latent_channels: int = Field(32, ge=1)
    class_channels: int = Field(16, ge=1)

    @field_validator("image_size")
    @classmethod
    def _size(cls, v: int) -> int:
        if not check_image_size(v):
            raise ValueError(f"image_size must be a multiple of 32 and >= 32, got {v}")
        return v

    @property
    def conditional(self) -> bool:
        return self.num_categories is not None

    def config_hash(self) -> str:
        payload = json.dumps(self.model_dump(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha1(payload.encode("utf-8")).hexdigest()


def _groups(ch: int) -> int:
    return 8 if ch % 8 == 0 else 1


def _init(module: nn.Module, slope: float) -> None:
    # zero-mean gaussian, std = gain / sqrt(fan_in)
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.Linear)):
            nn.init.kaiming_normal_(m.weight, a=slope, mode="fan_in", nonlinearity="leaky_relu")
            if m.bias is not None:
                nn.init.zeros_(m.bias)


class Encoder(nn.Module):
    """Parameter-free downsampling layers first, then conv + norm + ReLU + downsample blocks."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        n = halvings(cfg.image_size)
        n_blocks = min(MAX_ENCODER_BLOCKS, n)
        self.pool = nn.Sequential(*[nn.AvgPool2d(2) for _ in range(n - n_blocks)])
        blocks: List[nn.Module] = []
        c_in = 3
        for j in range(n_blocks):
            c_out = min(cfg.base_channels * 2 ** j, cfg.max_channels)
            blocks += [
                nn.Conv2d(c_in, c_out, 3, padding=1),
                nn.GroupNorm(_groups(c_out), c_out),
                nn.ReLU(),
                nn.AvgPool2d(2),
            ]
            c_in = c_out
        self.blocks = nn.Sequential(*blocks)
        self.head = nn.Conv2d(c_in, cfg.feature_channels, 1)
        self.n_halvings = n
        _init(self, 0.0)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.head(self.blocks(self.pool(x)))
        if h.shape[-1] != FEATURE_SIZE or h.shape[-2] != FEATURE_SIZE:
            h = F.adaptive_avg_pool2d(h, FEATURE_SIZE)
        return h


class _UpBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.conv = nn.Conv2d(c_in, c_out, 3, padding=1)
        self.norm = nn.GroupNorm(_groups(c_out), c_out)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = F.interpolate(x, scale_factor=2, mode="nearest")
        return F.relu(self.norm(self.conv(x)))


class Generator(nn.Module):
    """G(f, z, c): z and c are projected to 16×16 maps and stacked with f, then upsampled to image size."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        n = halvings(cfg.image_size)
        grid = FEATURE_SIZE * FEATURE_SIZE
        self.z_proj = nn.Linear(cfg.latent_dim, cfg.latent_channels * grid)
        self.c_proj = nn.Linear(cfg.num_categories, cfg.class_channels * grid, bias=False) if cfg.conditional else None

        c_in = cfg.feature_channels + cfg.latent_channels + (cfg.class_channels if cfg.conditional else 0)
        c0 = min(cfg.base_channels * 2 ** n, cfg.max_channels)
        self.stem = nn.Sequential(nn.Conv2d(c_in, c0, 3, padding=1), nn.GroupNorm(_groups(c0), c0), nn.ReLU())
        ups: List[nn.Module] = []
        c = c0
        for j in range(n):
            c_out = min(cfg.base_channels * 2 ** (n - 1 - j), cfg.max_channels)
            ups.append(_UpBlock(c, c_out))
            c = c_out
        self.ups = nn.Sequential(*ups)
        self.to_rgb = nn.Conv2d(c, 3, 3, padding=1)
        _init(self, 0.0)
        nn.init.normal_(self.to_rgb.weight, 0.0, 1.0 / math.sqrt(c * 9))

    def forward(self, f: torch.Tensor, z: torch.Tensor, c: Optional[torch.Tensor] = None) -> torch.Tensor:
        b = f.shape[0]
        parts = [f, self.z_proj(z).view(b, self.cfg.latent_channels, FEATURE_SIZE, FEATURE_SIZE)]
        if self.c_proj is not None:
            parts.append(self.c_proj(c).view(b, self.cfg.class_channels, FEATURE_SIZE, FEATURE_SIZE))
        h = self.ups(self.stem(torch.cat(parts, dim=1)))
        if h.shape[-1] != self.cfg.image_size:
            h = F.interpolate(h, size=(self.cfg.image_size, self.cfg.image_size), mode="bilinear", align_corners=False)
        return torch.tanh(self.to_rgb(h))


class Discriminator(nn.Module):
    """Strided conv backbone down to <=4×4, global sum pooling, linear head plus class projection."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        layers: List[nn.Module] = [nn.Conv2d(3, cfg.base_channels, 3, padding=1), nn.LeakyReLU(0.2)]
        c, s = cfg.base_channels, cfg.image_size
        while s > 4:
            c_out = min(c * 2, cfg.max_channels)
            layers += [nn.Conv2d(c, c_out, 4, stride=2, padding=1), nn.LeakyReLU(0.2)]
            c, s = c_out, s // 2
        self.backbone = nn.Sequential(*layers)
        self.head = nn.Linear(c, 1)
        self.embed = nn.Linear(cfg.num_categories, c, bias=False) if cfg.conditional else None
        _init(self, 0.2)
        for m in [m for m in self.modules() if isinstance(m, (nn.Conv2d, nn.Linear))]:
            spectral_norm(m)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        return self.backbone(x).sum(dim=(2, 3))

    def forward(self, x: torch.Tensor, c: Optional[torch.Tensor] = None) -> torch.Tensor:
        h = self.features(x)
        out = self.head(h).squeeze(1)
        if c is not None and self.embed is not None:
            out = out + (self.embed(c) * h).sum(dim=1)
        return out
