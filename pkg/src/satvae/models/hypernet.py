"""Wavelength-conditioned dynamic convolutions.

The first and last convolutions of the autoencoder are not stored weights:
a small hypernetwork maps each channel's center wavelength to that channel's
kernel slice, so one set of parameters serves any number of input channels.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F
from torch import nn

from ..data.types import WavelengthProfile
from ..exceptions import ShapeMismatchError


@dataclass(frozen=True)
class HypernetConfig:
    kernel_size: int = 3
    base_channels: int = 32
    embed_dim: int = 64
    hidden_dim: int = 128
    fourier_bands: int = 16

    def __post_init__(self):
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be an odd integer >= 1")
        for name in ("base_channels", "embed_dim", "hidden_dim", "fourier_bands"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "HypernetConfig":
        return cls(**d)


@dataclass
class GeneratedConvWeights:
    """A conv layer materialized from wavelengths: kernel + bias tensors."""

    kernel: torch.Tensor
    bias: torch.Tensor


def _as_wavelength_tensor(
    wavelengths: WavelengthProfile | torch.Tensor,
    dtype: torch.dtype,
) -> torch.Tensor:
    if isinstance(wavelengths, WavelengthProfile):
        wl = wavelengths.as_tensor(dtype=dtype)
    else:
        wl = wavelengths.to(dtype)
    if wl.ndim != 1 or wl.numel() < 1:
        raise ShapeMismatchError("wavelengths must be a 1-D tensor with >= 1 entry")
    if not torch.isfinite(wl).all() or (wl <= 0).any():
        raise ValueError("wavelengths must be finite and positive")
    return wl


class WavelengthEmbedding(nn.Module):
    """Fourier features of log10(wavelength in microns), linearly projected.

    Dyadic frequencies make nearby-but-distinct wavelengths separable while
    keeping the map deterministic and smooth in the conditioning variable.
    """

    def __init__(self, cfg: HypernetConfig):
        super().__init__()
        self.cfg = cfg
        freqs = 2.0 ** torch.arange(cfg.fourier_bands, dtype=torch.float32)
        self.register_buffer("frequencies", freqs)
        self.proj = nn.Linear(2 * cfg.fourier_bands, cfg.embed_dim)

    def forward(self, wavelengths: WavelengthProfile | torch.Tensor) -> torch.Tensor:
        wl = _as_wavelength_tensor(wavelengths, self.proj.weight.dtype)
        log_um = torch.log10(wl / 1000.0)
        phases = log_um.unsqueeze(-1) * self.frequencies
        feats = torch.cat([torch.sin(phases), torch.cos(phases)], dim=-1)
        return self.proj(feats)


class _GeneratorMLP(nn.Module):
    def __init__(self, in_dim: int, hidden_dim: int, out_dim: int, out_scale: float = 1.0):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(in_dim, hidden_dim),
            nn.SiLU(),
            nn.Linear(hidden_dim, out_dim),
        )
        if out_scale != 1.0:
            with torch.no_grad():
                self.net[-1].weight.mul_(out_scale)
                self.net[-1].bias.mul_(out_scale)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class DynamicConv(nn.Module):
    """Conv layer whose weights are generated per call from wavelengths.

    role='stem': kernel [base, C, k, k], one input-channel slice per
    wavelength; bias [base] from the mean embedding.
    role='head': kernel [C, base, k, k], one output-channel slice per
    wavelength; bias [C], one scalar per channel from its own embedding
    (a fixed-size map from the mean embedding cannot yield a C-length bias).
    """

    def __init__(self, cfg: HypernetConfig, role: str):
        super().__init__()
        if role not in ("stem", "head"):
            raise ValueError(f"role must be 'stem' or 'head', got {role!r}")
        self.cfg = cfg
        self.role = role
        self.embedding = WavelengthEmbedding(cfg)
        slice_size = cfg.base_channels * cfg.kernel_size * cfg.kernel_size
        # Scale the kernel generator so freshly generated convs land near
        # standard kaiming magnitude instead of saturating activations.
        kernel_gain = 1.0 / math.sqrt(slice_size)
        self.kernel_mlp = _GeneratorMLP(cfg.embed_dim, cfg.hidden_dim, slice_size,
                                        out_scale=kernel_gain * 4.0)
        bias_out = cfg.base_channels if role == "stem" else 1
        self.bias_mlp = _GeneratorMLP(cfg.embed_dim, cfg.hidden_dim, bias_out,
                                      out_scale=0.1)

    def generate(self, wavelengths: WavelengthProfile | torch.Tensor) -> GeneratedConvWeights:
        emb = self.embedding(wavelengths)
        k = self.cfg.kernel_size
        slices = self.kernel_mlp(emb).view(-1, self.cfg.base_channels, k, k)
        if self.role == "stem":
            kernel = slices.permute(1, 0, 2, 3).contiguous()
            bias = self.bias_mlp(emb.mean(dim=0, keepdim=True)).squeeze(0)
        else:
            kernel = slices
            bias = self.bias_mlp(emb).squeeze(-1)
        return GeneratedConvWeights(kernel=kernel, bias=bias)

    def forward(
        self,
        x: torch.Tensor,
        wavelengths: WavelengthProfile | torch.Tensor,
    ) -> torch.Tensor:
        weights = self.generate(wavelengths)
        expected_in = weights.kernel.shape[1]
        if x.shape[1] != expected_in:
            raise ShapeMismatchError(
                f"{self.role} conv expects {expected_in} input channels, got {x.shape[1]}"
            )
        return F.conv2d(x, weights.kernel, weights.bias, padding=self.cfg.kernel_size // 2)


def generate_stem_weights(
    stem: DynamicConv, wavelengths: WavelengthProfile | torch.Tensor
) -> GeneratedConvWeights:
    if stem.role != "stem":
        raise ValueError("module is not a stem hypernetwork")
    return stem.generate(wavelengths)


def generate_head_weights(
    head: DynamicConv, wavelengths: WavelengthProfile | torch.Tensor
) -> GeneratedConvWeights:
    if head.role != "head":
        raise ValueError("module is not a head hypernetwork")
    return head.generate(wavelengths)
