"""Fixed convolutional encoder/decoder stacks around the dynamic stem/head.

Standard residual design: GroupNorm + SiLU blocks, strided-conv
downsampling, nearest-upsample + conv upsampling. Widths are configurable;
the spatial compression factor is 2^(len(widths) - 1).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F
from torch import nn


@dataclass(frozen=True)
class VAEConfig:
    downsample_factor: int = 8
    latent_channels: int = 16
    widths: tuple[int, ...] = (32, 64, 128, 128)
    blocks_per_stage: int = 2
    kl_weight: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if not self.widths:
            raise ValueError("widths must be nonempty")
        stages = len(self.widths) - 1
        if self.downsample_factor != 2 ** stages:
            raise ValueError(
                f"downsample_factor {self.downsample_factor} requires "
                f"{int(math.log2(self.downsample_factor)) + 1} widths, got {len(self.widths)}"
            )
        if self.latent_channels < 1 or self.blocks_per_stage < 1:
            raise ValueError("latent_channels and blocks_per_stage must be >= 1")
        if self.kl_weight < 0:
            raise ValueError("kl_weight must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "VAEConfig":
        d = dict(d)
        d["widths"] = tuple(d["widths"])
        return cls(**d)


def _norm(ch: int) -> nn.GroupNorm:
    return nn.GroupNorm(math.gcd(8, ch), ch)


class ResidualBlock(nn.Module):
    def __init__(self, ch_in: int, ch_out: int):
        super().__init__()
        self.norm1 = _norm(ch_in)
        self.conv1 = nn.Conv2d(ch_in, ch_out, 3, padding=1)
        self.norm2 = _norm(ch_out)
        self.conv2 = nn.Conv2d(ch_out, ch_out, 3, padding=1)
        self.skip = nn.Conv2d(ch_in, ch_out, 1) if ch_in != ch_out else nn.Identity()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class Downsample(nn.Module):
    def __init__(self, ch_in: int, ch_out: int):
        super().__init__()
        self.conv = nn.Conv2d(ch_in, ch_out, 3, stride=2, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(x)


class Upsample(nn.Module):
    def __init__(self, ch_in: int, ch_out: int):
        super().__init__()
        self.conv = nn.Conv2d(ch_in, ch_out, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(F.interpolate(x, scale_factor=2.0, mode="nearest"))


class EncoderBackbone(nn.Module):
    """widths[0] feature map -> [2 * latent_channels] moments map."""

    def __init__(self, cfg: VAEConfig):
        super().__init__()
        layers: list[nn.Module] = []
        widths = cfg.widths
        for i, width in enumerate(widths):
            if i > 0:
                layers.append(Downsample(widths[i - 1], width))
            layers.extend(ResidualBlock(width, width) for _ in range(cfg.blocks_per_stage))
        self.stages = nn.Sequential(*layers)
        self.out_norm = _norm(widths[-1])
        self.to_moments = nn.Conv2d(widths[-1], 2 * cfg.latent_channels, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.stages(x)
        return self.to_moments(F.silu(self.out_norm(h)))


class DecoderBackbone(nn.Module):
    """latent map -> widths[0] feature map ready for the dynamic head."""

    def __init__(self, cfg: VAEConfig):
        super().__init__()
        widths = cfg.widths
        self.from_latent = nn.Conv2d(cfg.latent_channels, widths[-1], 3, padding=1)
        layers: list[nn.Module] = []
        for i in range(len(widths) - 1, -1, -1):
            layers.extend(ResidualBlock(widths[i], widths[i]) for _ in range(cfg.blocks_per_stage))
            if i > 0:
                layers.append(Upsample(widths[i], widths[i - 1]))
        self.stages = nn.Sequential(*layers)
        self.out_norm = _norm(widths[0])

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        h = self.stages(self.from_latent(z))
        return F.silu(self.out_norm(h))
