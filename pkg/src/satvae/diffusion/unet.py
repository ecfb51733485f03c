"""UNet denoiser predicting the clean sample (x-prediction).

Standard residual UNet: sinusoidal timestep embedding injected into every
block, strided-conv downsampling, nearest-upsample + conv upsampling, skip
concatenation. Conditioning (upsampled low-resolution latents or pixels)
arrives concatenated on the channel axis, so ``in_channels`` is double the
data channels for the super-resolution task.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F
from torch import nn

from ..exceptions import ShapeMismatchError
from ..seeding import isolated_torch_seed


@dataclass(frozen=True)
class UNetConfig:
    # Default denoiser sizes to ~11.0M parameters at 32-in/16-out.
    in_channels: int = 32
    out_channels: int = 16
    widths: tuple[int, ...] = (64, 128, 264)
    blocks_per_stage: int = 2
    time_dim: int = 256

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if not self.widths:
            raise ValueError("widths must be nonempty")
        if min(self.in_channels, self.out_channels, self.blocks_per_stage, self.time_dim) < 1:
            raise ValueError("all UNet dimensions must be >= 1")

    @property
    def spatial_divisor(self) -> int:
        return 2 ** (len(self.widths) - 1)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "UNetConfig":
        d = dict(d)
        d["widths"] = tuple(d["widths"])
        return cls(**d)


def tiny_unet_config(in_channels: int, out_channels: int) -> UNetConfig:
    return UNetConfig(in_channels=in_channels, out_channels=out_channels,
                      widths=(32, 48), blocks_per_stage=1, time_dim=64)


def sinusoidal_embedding(t: torch.Tensor, dim: int, max_period: float = 10_000.0) -> torch.Tensor:
    """[B] continuous times in [0, 1] -> [B, dim] sinusoidal features."""
    half = dim // 2
    freqs = torch.exp(
        -math.log(max_period) * torch.arange(half, dtype=t.dtype) / max(half - 1, 1)
    )
    args = t.unsqueeze(-1) * 1000.0 * freqs
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=-1)
    if dim % 2:
        emb = F.pad(emb, (0, 1))
    return emb


def _norm(ch: int) -> nn.GroupNorm:
    return nn.GroupNorm(math.gcd(8, ch), ch)


class TimeResBlock(nn.Module):
    def __init__(self, ch_in: int, ch_out: int, time_dim: int):
        super().__init__()
        self.norm1 = _norm(ch_in)
        self.conv1 = nn.Conv2d(ch_in, ch_out, 3, padding=1)
        self.time_proj = nn.Linear(time_dim, ch_out)
        self.norm2 = _norm(ch_out)
        self.conv2 = nn.Conv2d(ch_out, ch_out, 3, padding=1)
        self.skip = nn.Conv2d(ch_in, ch_out, 1) if ch_in != ch_out else nn.Identity()

    def forward(self, x: torch.Tensor, t_emb: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.time_proj(F.silu(t_emb))[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class DenoiserUNet(nn.Module):
    def __init__(self, cfg: UNetConfig):
        super().__init__()
        self.cfg = cfg
        widths = cfg.widths
        time_dim = cfg.time_dim

        self.time_mlp = nn.Sequential(
            nn.Linear(time_dim, time_dim),
            nn.SiLU(),
            nn.Linear(time_dim, time_dim),
        )
        self.conv_in = nn.Conv2d(cfg.in_channels, widths[0], 3, padding=1)

        self.down_blocks = nn.ModuleList()
        self.downsamplers = nn.ModuleList()
        for i, width in enumerate(widths):
            ch = widths[i - 1] if i > 0 else widths[0]
            blocks = nn.ModuleList()
            for b in range(cfg.blocks_per_stage):
                blocks.append(TimeResBlock(ch if b == 0 else width, width, time_dim))
            self.down_blocks.append(blocks)
            if i < len(widths) - 1:
                self.downsamplers.append(nn.Conv2d(width, width, 3, stride=2, padding=1))

        self.mid1 = TimeResBlock(widths[-1], widths[-1], time_dim)
        self.mid2 = TimeResBlock(widths[-1], widths[-1], time_dim)

        self.up_blocks = nn.ModuleList()
        self.upsamplers = nn.ModuleList()
        for i in range(len(widths) - 1, -1, -1):
            width = widths[i]
            blocks = nn.ModuleList()
            for b in range(cfg.blocks_per_stage):
                ch_in = width + width if b == 0 else width  # skip concat on entry
                blocks.append(TimeResBlock(ch_in, width, time_dim))
            self.up_blocks.append(blocks)
            if i > 0:
                self.upsamplers.append(nn.Conv2d(width, widths[i - 1], 3, padding=1))

        self.out_norm = _norm(widths[0])
        self.conv_out = nn.Conv2d(widths[0], cfg.out_channels, 3, padding=1)
        nn.init.zeros_(self.conv_out.weight)
        nn.init.zeros_(self.conv_out.bias)

    def forward(
        self,
        x_t: torch.Tensor,
        t: torch.Tensor | float,
        cond: torch.Tensor | None = None,
    ) -> torch.Tensor:
        if cond is not None:
            if cond.shape[-2:] != x_t.shape[-2:]:
                raise ShapeMismatchError(
                    f"conditioning spatial {tuple(cond.shape[-2:])} vs input {tuple(x_t.shape[-2:])}"
                )
            x = torch.cat([x_t, cond], dim=1)
        else:
            x = x_t
        if x.shape[1] != self.cfg.in_channels:
            raise ShapeMismatchError(
                f"UNet expects {self.cfg.in_channels} input channels, got {x.shape[1]}"
            )
        div = self.cfg.spatial_divisor
        if x.shape[-2] % div or x.shape[-1] % div:
            raise ShapeMismatchError(
                f"spatial dims {tuple(x.shape[-2:])} not divisible by {div}"
            )

        tt = torch.as_tensor(t, dtype=x.dtype)
        if tt.ndim == 0:
            tt = tt.expand(x.shape[0])
        t_emb = self.time_mlp(sinusoidal_embedding(tt, self.cfg.time_dim))

        h = self.conv_in(x)
        skips = []
        for i, blocks in enumerate(self.down_blocks):
            for block in blocks:
                h = block(h, t_emb)
            skips.append(h)
            if i < len(self.downsamplers):
                h = self.downsamplers[i](h)

        h = self.mid1(h, t_emb)
        h = self.mid2(h, t_emb)

        for j, blocks in enumerate(self.up_blocks):
            skip = skips.pop()
            h = torch.cat([h, skip], dim=1)
            for block in blocks:
                h = block(h, t_emb)
            if j < len(self.upsamplers):
                h = self.upsamplers[j](
                    F.interpolate(h, scale_factor=2.0, mode="nearest")
                )

        return self.conv_out(F.silu(self.out_norm(h)))


def build_unet(cfg: UNetConfig, seed: int = 0) -> DenoiserUNet:
    with isolated_torch_seed(seed):
        return DenoiserUNet(cfg)
