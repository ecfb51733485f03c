"""The channel-flexible variational autoencoder.

One model instance reconstructs rasters with any number of spectral channels:
``x_hat = decode(encode(x; wavelengths); wavelengths)`` where the stem and
head convolutions are generated from the wavelengths at every call. The
backbone parameter count is independent of the channel count.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import torch
from torch import nn

from ..data.types import Modality, MultispectralImage, ValueSpace, WavelengthProfile
from ..exceptions import ShapeMismatchError, ValueSpaceError
from ..seeding import isolated_torch_seed
from .backbone import DecoderBackbone, EncoderBackbone, VAEConfig
from .hypernet import DynamicConv, HypernetConfig


@dataclass
class LatentCode:
    """Gaussian posterior over latents: mean, log-variance, optional draw."""

    mean: torch.Tensor
    log_variance: torch.Tensor
    sample: torch.Tensor | None = None

    def sampled_or_mean(self) -> torch.Tensor:
        return self.sample if self.sample is not None else self.mean


def tiny_hypernet_config() -> HypernetConfig:
    return HypernetConfig(kernel_size=3, base_channels=32, embed_dim=32,
                          hidden_dim=64, fourier_bands=12)


def tiny_vae_config() -> VAEConfig:
    return VAEConfig(downsample_factor=8, latent_channels=16,
                     widths=(32, 48, 64, 64), blocks_per_stage=1)


class VAEModel(nn.Module):
    def __init__(self, vae_cfg: VAEConfig | None = None,
                 hyper_cfg: HypernetConfig | None = None):
        super().__init__()
        self.vae_cfg = vae_cfg or VAEConfig()
        self.hyper_cfg = hyper_cfg or HypernetConfig()
        if self.hyper_cfg.base_channels != self.vae_cfg.widths[0]:
            raise ValueError(
                f"hypernet base_channels {self.hyper_cfg.base_channels} must equal "
                f"first backbone width {self.vae_cfg.widths[0]}"
            )
        self.stem = DynamicConv(self.hyper_cfg, "stem")
        self.encoder_backbone = EncoderBackbone(self.vae_cfg)
        self.decoder_backbone = DecoderBackbone(self.vae_cfg)
        self.head = DynamicConv(self.hyper_cfg, "head")

    # -- parameter groups ---------------------------------------------------

    def hypernet_parameters(self):
        yield from self.stem.parameters()
        yield from self.head.parameters()

    def backbone_parameters(self):
        yield from self.encoder_backbone.parameters()
        yield from self.decoder_backbone.parameters()

    # -- batched tensor API ---------------------------------------------------

    def encode_tensor(
        self,
        x: torch.Tensor,
        wavelengths: WavelengthProfile | torch.Tensor,
        generator: torch.Generator | None = None,
        sample: bool = True,
    ) -> LatentCode:
        if x.ndim != 4:
            raise ShapeMismatchError(f"expected [B,C,H,W], got {tuple(x.shape)}")
        f = self.vae_cfg.downsample_factor
        if x.shape[-2] % f or x.shape[-1] % f:
            raise ShapeMismatchError(
                f"spatial dims {tuple(x.shape[-2:])} not divisible by factor {f}"
            )
        h = self.stem(x, wavelengths)
        moments = self.encoder_backbone(h)
        mean, log_variance = moments.chunk(2, dim=1)
        drawn = None
        if sample:
            if generator is None:
                raise ValueError("sampling requires an explicit torch.Generator")
            eps = torch.randn(mean.shape, generator=generator, dtype=mean.dtype)
            drawn = mean + torch.exp(0.5 * log_variance) * eps
        return LatentCode(mean=mean, log_variance=log_variance, sample=drawn)

    def decode_tensor(
        self,
        z: torch.Tensor,
        wavelengths: WavelengthProfile | torch.Tensor,
    ) -> torch.Tensor:
        if z.ndim != 4:
            raise ShapeMismatchError(f"expected [B,L,h,w] latents, got {tuple(z.shape)}")
        if z.shape[1] != self.vae_cfg.latent_channels:
            raise ShapeMismatchError(
                f"latent has {z.shape[1]} channels, model expects {self.vae_cfg.latent_channels}"
            )
        h = self.decoder_backbone(z)
        return self.head(h, wavelengths)

    def reconstruct_tensor(
        self,
        x: torch.Tensor,
        wavelengths: WavelengthProfile | torch.Tensor,
        mode: str = "sample",
        generator: torch.Generator | None = None,
    ) -> tuple[torch.Tensor, LatentCode]:
        if mode not in ("sample", "mean"):
            raise ValueError(f"mode must be 'sample' or 'mean', got {mode!r}")
        latent = self.encode_tensor(x, wavelengths, generator=generator,
                                    sample=(mode == "sample"))
        z = latent.sampled_or_mean()
        return self.decode_tensor(z, wavelengths), latent

    # -- image-level API ------------------------------------------------------

    def reconstruct_image(
        self,
        img: MultispectralImage,
        mode: str = "sample",
        generator: torch.Generator | None = None,
    ) -> MultispectralImage:
        return reconstruct(self, img, mode=mode, generator=generator)


def build_vae(
    vae_cfg: VAEConfig | None = None,
    hyper_cfg: HypernetConfig | None = None,
    seed: int = 0,
) -> VAEModel:
    """Construct a VAE with deterministic, seed-controlled initialization."""
    with isolated_torch_seed(seed):
        return VAEModel(vae_cfg, hyper_cfg)


def _require_normalized(img: MultispectralImage) -> None:
    if img.value_space is not ValueSpace.NORMALIZED:
        raise ValueSpaceError("model inputs must be NORMALIZED (z-scored) images")


def encode(
    model: VAEModel,
    img: MultispectralImage,
    generator: torch.Generator | None = None,
) -> LatentCode:
    """Posterior for one image; draws a sample from the supplied generator."""
    _require_normalized(img)
    code = model.encode_tensor(img.pixels.unsqueeze(0), img.wavelengths,
                               generator=generator, sample=generator is not None)
    return LatentCode(
        mean=code.mean.squeeze(0),
        log_variance=code.log_variance.squeeze(0),
        sample=None if code.sample is None else code.sample.squeeze(0),
    )


def deterministic_encode(model: VAEModel, img: MultispectralImage) -> LatentCode:
    """Posterior mean only (no sampling)."""
    return encode(model, img, generator=None)


def decode(
    model: VAEModel,
    z: LatentCode | torch.Tensor,
    wavelengths: WavelengthProfile,
    modality: Modality = Modality.OTHER,
) -> MultispectralImage:
    latent = z.sampled_or_mean() if isinstance(z, LatentCode) else z
    pixels = model.decode_tensor(latent.unsqueeze(0), wavelengths).squeeze(0)
    return MultispectralImage(
        pixels=pixels.detach(),
        wavelengths=wavelengths,
        modality=modality,
        value_space=ValueSpace.NORMALIZED,
    )


def reconstruct(
    model: VAEModel,
    img: MultispectralImage,
    mode: str = "sample",
    generator: torch.Generator | None = None,
) -> MultispectralImage:
    """Encode then decode, preserving the image's wavelengths and metadata."""
    _require_normalized(img)
    if mode == "sample" and generator is None:
        raise ValueError("mode='sample' requires a torch.Generator")
    pixels, _ = model.reconstruct_tensor(
        img.pixels.unsqueeze(0), img.wavelengths, mode=mode, generator=generator
    )
    return replace(img, pixels=pixels.squeeze(0).detach())


def kl_divergence(latent: LatentCode) -> torch.Tensor:
    """KL(q || N(0, I)) averaged per latent element; always >= 0."""
    mu, logvar = latent.mean, latent.log_variance
    return 0.5 * (mu * mu + torch.exp(logvar) - 1.0 - logvar).mean()
