"""Latent super-resolution harness plus the pixel-space baseline.

Latent path: a frozen autoencoder maps paired low/high-resolution tiles into
latent space; the denoiser learns to predict high-resolution latents
conditioned on nearest-upsampled low-resolution latents concatenated on the
channel axis. The pixel baseline runs the identical diffusion machinery
directly on (normalized) pixels with upsampled low-resolution pixels as
conditioning, existing chiefly so the latency comparison is apples-to-apples.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
import torch.nn.functional as F

from ..data.stats import denormalize_array, normalize_array
from ..data.tiles import load_tile, read_header
from ..data.types import (
    DatasetManifest,
    ManifestEntry,
    Modality,
    MultispectralImage,
    NormalizationStats,
    Split,
    ValueSpace,
)
from ..exceptions import ConfigError, ManifestError, ShapeMismatchError
from ..models.checkpoint import load_checkpoint, save_checkpoint
from ..models.vae import VAEModel
from ..seeding import make_generator, step_generator
from .ddim import ddim_sample
from .edm import edm_loss
from .schedule import NoiseSchedule
from .unet import DenoiserUNet, UNetConfig, build_unet


@dataclass(frozen=True)
class SRPipelineConfig:
    scale: int = 4
    lr_size: int = 128
    hr_size: int = 512
    sampler_steps: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.hr_size != self.lr_size * self.scale:
            raise ConfigError(
                f"hr_size {self.hr_size} must equal lr_size {self.lr_size} * scale {self.scale}"
            )
        if self.sampler_steps < 1:
            raise ConfigError("sampler_steps must be >= 1")

    @classmethod
    def desk_preset(cls, sampler_steps: int = 50, seed: int = 0) -> "SRPipelineConfig":
        """32 -> 128 px keeps runtimes in minutes while preserving scale 4."""
        return cls(scale=4, lr_size=32, hr_size=128, sampler_steps=sampler_steps, seed=seed)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SRPipelineConfig":
        return cls(**d)


@dataclass
class SRTrainConfig:
    steps: int = 2000
    batch_size: int = 4
    learning_rate: float = 1e-3
    weight_decay: float = 0.0
    seed: int = 0
    checkpoint_every: int = 500
    # Training-time floor on sampled t: the 1/sigma^2 EDM weight grows like
    # 9000 at t = 1e-3, and rare draws there swamp the gradient moments.
    # Inference still integrates down to the schedule's own t_min.
    t_train_min: float = 0.02

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1 or self.checkpoint_every < 1:
            raise ConfigError("steps, batch_size, checkpoint_every must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.t_train_min < 0:
            raise ConfigError("t_train_min must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SRTrainConfig":
        return cls(**d)


def paired_entries(
    manifest: DatasetManifest,
    split: Split | None = None,
) -> list[tuple[ManifestEntry, ManifestEntry]]:
    """(hr, lr) entry pairs grouped by pair_id; sizes read from tile headers."""
    groups: dict[str, list[ManifestEntry]] = {}
    for entry in manifest.entries:
        if entry.pair_id is None:
            continue
        if split is not None and entry.split != split:
            continue
        groups.setdefault(entry.pair_id, []).append(entry)

    pairs = []
    for pair_id, members in sorted(groups.items()):
        if len(members) != 2:
            raise ManifestError(f"pair {pair_id} has {len(members)} tiles, expected 2")
        sizes = [read_header(m.tile_path)["H"] for m in members]
        if sizes[0] == sizes[1]:
            raise ManifestError(f"pair {pair_id} tiles have equal size {sizes[0]}")
        hr, lr = (members[0], members[1]) if sizes[0] > sizes[1] else (members[1], members[0])
        pairs.append((hr, lr))
    if not pairs:
        raise ManifestError("manifest contains no usable pairs")
    return pairs


def _freeze(model: VAEModel) -> None:
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)


def _encode_mean(vae: VAEModel, pixels: torch.Tensor, wavelengths: torch.Tensor) -> torch.Tensor:
    with torch.no_grad():
        return vae.encode_tensor(pixels.unsqueeze(0), wavelengths, sample=False).mean.squeeze(0)


@dataclass
class LatentPairSet:
    """Precomputed HR target latents and upsampled LR conditioning latents."""

    targets: torch.Tensor      # [N, L, h, w]
    conditioning: torch.Tensor  # [N, L, h, w]
    wavelengths: torch.Tensor
    modality: Modality


def encode_pairs(
    vae: VAEModel,
    manifest: DatasetManifest,
    stats: NormalizationStats,
    cfg: SRPipelineConfig,
    split: Split | None = None,
) -> LatentPairSet:
    pairs = paired_entries(manifest, split)
    targets, conds = [], []
    wavelengths = None
    modality = None
    for hr_entry, lr_entry in pairs:
        hr = load_tile(hr_entry.tile_path)
        lr = load_tile(lr_entry.tile_path)
        if hr.height != cfg.hr_size or lr.height != cfg.lr_size:
            raise ShapeMismatchError(
                f"pair sizes ({hr.height}, {lr.height}) do not match config "
                f"({cfg.hr_size}, {cfg.lr_size})"
            )
        wavelengths = hr.wavelengths.as_tensor()
        modality = hr.modality
        z_hr = _encode_mean(vae, normalize_array(hr.pixels, stats), wavelengths)
        z_lr = _encode_mean(vae, normalize_array(lr.pixels, stats), wavelengths)
        z_lr_up = F.interpolate(z_lr.unsqueeze(0), size=z_hr.shape[-2:], mode="nearest").squeeze(0)
        targets.append(z_hr)
        conds.append(z_lr_up)
    return LatentPairSet(
        targets=torch.stack(targets),
        conditioning=torch.stack(conds),
        wavelengths=wavelengths,
        modality=modality,
    )


def _train_denoiser(
    targets: torch.Tensor,
    conditioning: torch.Tensor,
    unet_cfg: UNetConfig,
    train_cfg: SRTrainConfig,
    schedule: NoiseSchedule,
    out_dir: Path,
    tag: str,
    extra_configs: dict,
    val_targets: torch.Tensor | None = None,
    val_conditioning: torch.Tensor | None = None,
) -> tuple[Path, Path]:
    """Shared EDM training loop for latent and pixel denoisers."""
    denoiser = build_unet(unet_cfg, seed=train_cfg.seed)
    optimizer = torch.optim.AdamW(denoiser.parameters(), lr=train_cfg.learning_rate,
                                  weight_decay=train_cfg.weight_decay)
    n = targets.shape[0]
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = out_dir / f"{tag}_checkpoint.svcp"
    log_path = out_dir / f"{tag}_log.jsonl"
    t_floor = max(schedule.t_min, train_cfg.t_train_min)

    with open(log_path, "w") as log:
        for step in range(train_cfg.steps):
            gen = step_generator(train_cfg.seed, step)
            idx = torch.randint(n, (train_cfg.batch_size,), generator=gen)
            x0 = targets[idx]
            cond = conditioning[idx]
            u = torch.rand(train_cfg.batch_size, generator=gen, dtype=torch.float64)
            t = t_floor + (schedule.t_max - t_floor) * u

            optimizer.zero_grad(set_to_none=True)
            loss = edm_loss(denoiser, x0, cond, t, schedule, gen)
            loss.backward()
            optimizer.step()

            record = {"step": step, "loss": float(loss.detach())}
            done = step + 1 == train_cfg.steps
            if (step + 1) % train_cfg.checkpoint_every == 0 or done:
                if val_targets is not None and val_targets.shape[0] > 0:
                    with torch.no_grad():
                        vgen = step_generator(train_cfg.seed, step, 7)
                        vu = torch.rand(val_targets.shape[0], generator=vgen,
                                        dtype=torch.float64)
                        vt = t_floor + (schedule.t_max - t_floor) * vu
                        vloss = edm_loss(denoiser, val_targets, val_conditioning,
                                         vt, schedule, vgen)
                    record["val_loss"] = float(vloss)
                save_checkpoint(
                    ckpt_path,
                    {"kind": "unet", "unet": unet_cfg.to_dict(),
                     "schedule": schedule.to_dict(), "step": step + 1, **extra_configs},
                    dict(denoiser.state_dict()),
                )
            log.write(json.dumps(record) + "\n")
    return ckpt_path, log_path


def train_sr(
    manifest: DatasetManifest,
    vae: VAEModel,
    stats: NormalizationStats,
    sr_cfg: SRPipelineConfig,
    train_cfg: SRTrainConfig,
    out_dir: str | Path,
    unet_cfg: UNetConfig | None = None,
    schedule: NoiseSchedule | None = None,
) -> tuple[Path, Path]:
    """Train the latent SR denoiser against a frozen autoencoder."""
    out_dir = Path(out_dir)
    schedule = schedule or NoiseSchedule()
    _freeze(vae)
    latent_channels = vae.vae_cfg.latent_channels
    if unet_cfg is None:
        unet_cfg = UNetConfig(in_channels=2 * latent_channels, out_channels=latent_channels)
    if unet_cfg.in_channels != 2 * latent_channels or unet_cfg.out_channels != latent_channels:
        raise ConfigError(
            "latent SR UNet must take 2*latent_channels in (target + conditioning) "
            "and emit latent_channels out"
        )

    train_set = encode_pairs(vae, manifest, stats, sr_cfg, Split.TRAIN)
    try:
        val_set = encode_pairs(vae, manifest, stats, sr_cfg, Split.VAL)
        val_targets, val_cond = val_set.targets, val_set.conditioning
    except ManifestError:
        val_targets = val_cond = None

    return _train_denoiser(
        train_set.targets, train_set.conditioning, unet_cfg, train_cfg, schedule,
        out_dir, "sr_latent",
        {"sr": sr_cfg.to_dict(), "space": "latent"},
        val_targets, val_cond,
    )


def infer_sr(
    lr_img: MultispectralImage,
    vae: VAEModel,
    denoiser: DenoiserUNet,
    stats: NormalizationStats,
    sr_cfg: SRPipelineConfig,
    schedule: NoiseSchedule | None = None,
    seed: int | None = None,
    generator: torch.Generator | None = None,
) -> MultispectralImage:
    """LR RAW image -> HR RAW image via encode, DDIM in latent space, decode."""
    if lr_img.value_space is not ValueSpace.RAW:
        raise ConfigError("infer_sr expects a RAW-space LR image")
    if lr_img.height != sr_cfg.lr_size or lr_img.width != sr_cfg.lr_size:
        raise ShapeMismatchError(
            f"LR size {(lr_img.height, lr_img.width)} does not match config {sr_cfg.lr_size}"
        )
    schedule = schedule or NoiseSchedule()
    if generator is None:
        generator = make_generator(sr_cfg.seed if seed is None else seed)
    _freeze(vae)

    wavelengths = lr_img.wavelengths.as_tensor()
    f = vae.vae_cfg.downsample_factor
    hr_latent_hw = sr_cfg.hr_size // f

    z_lr = _encode_mean(vae, normalize_array(lr_img.pixels, stats), wavelengths)
    cond = F.interpolate(z_lr.unsqueeze(0), size=(hr_latent_hw, hr_latent_hw), mode="nearest")

    shape = (1, vae.vae_cfg.latent_channels, hr_latent_hw, hr_latent_hw)
    z_hr = ddim_sample(denoiser, cond, schedule, shape, steps=sr_cfg.sampler_steps,
                       generator=generator)
    with torch.no_grad():
        pixels = vae.decode_tensor(z_hr, wavelengths).squeeze(0)
    raw = denormalize_array(pixels, stats)
    return MultispectralImage(
        pixels=raw, wavelengths=lr_img.wavelengths, modality=lr_img.modality,
        acquisition_date=lr_img.acquisition_date, value_space=ValueSpace.RAW,
    )


def pixel_pairs(
    manifest: DatasetManifest,
    stats: NormalizationStats,
    cfg: SRPipelineConfig,
    split: Split | None = None,
) -> LatentPairSet:
    """Normalized HR pixel targets + nearest-upsampled LR pixel conditioning."""
    pairs = paired_entries(manifest, split)
    targets, conds = [], []
    wavelengths = None
    modality = None
    for hr_entry, lr_entry in pairs:
        hr = load_tile(hr_entry.tile_path)
        lr = load_tile(lr_entry.tile_path)
        if hr.height != cfg.hr_size or lr.height != cfg.lr_size:
            raise ShapeMismatchError("pair sizes do not match config")
        wavelengths = hr.wavelengths.as_tensor()
        modality = hr.modality
        targets.append(normalize_array(hr.pixels, stats))
        lr_up = F.interpolate(
            normalize_array(lr.pixels, stats).unsqueeze(0),
            size=(cfg.hr_size, cfg.hr_size), mode="nearest",
        ).squeeze(0)
        conds.append(lr_up)
    return LatentPairSet(torch.stack(targets), torch.stack(conds), wavelengths, modality)


def train_pixel_baseline(
    manifest: DatasetManifest,
    stats: NormalizationStats,
    sr_cfg: SRPipelineConfig,
    train_cfg: SRTrainConfig,
    out_dir: str | Path,
    unet_cfg: UNetConfig | None = None,
    schedule: NoiseSchedule | None = None,
    channels: int | None = None,
) -> tuple[Path, Path]:
    """Identical diffusion machinery operating directly on pixels."""
    out_dir = Path(out_dir)
    schedule = schedule or NoiseSchedule()
    train_set = pixel_pairs(manifest, stats, sr_cfg, Split.TRAIN)
    c = channels or train_set.targets.shape[1]
    if unet_cfg is None:
        unet_cfg = UNetConfig(in_channels=2 * c, out_channels=c)
    if unet_cfg.in_channels != 2 * c or unet_cfg.out_channels != c:
        raise ConfigError("pixel baseline UNet must take 2*C in and emit C out")

    try:
        val_set = pixel_pairs(manifest, stats, sr_cfg, Split.VAL)
        val_targets, val_cond = val_set.targets, val_set.conditioning
    except ManifestError:
        val_targets = val_cond = None

    return _train_denoiser(
        train_set.targets, train_set.conditioning, unet_cfg, train_cfg, schedule,
        out_dir, "sr_pixel",
        {"sr": sr_cfg.to_dict(), "space": "pixel"},
        val_targets, val_cond,
    )


def infer_pixel_baseline(
    lr_img: MultispectralImage,
    denoiser: DenoiserUNet,
    stats: NormalizationStats,
    sr_cfg: SRPipelineConfig,
    schedule: NoiseSchedule | None = None,
    seed: int | None = None,
    generator: torch.Generator | None = None,
) -> MultispectralImage:
    if lr_img.value_space is not ValueSpace.RAW:
        raise ConfigError("infer_pixel_baseline expects a RAW-space LR image")
    schedule = schedule or NoiseSchedule()
    if generator is None:
        generator = make_generator(sr_cfg.seed if seed is None else seed)

    c = lr_img.channels
    cond = F.interpolate(
        normalize_array(lr_img.pixels, stats).unsqueeze(0),
        size=(sr_cfg.hr_size, sr_cfg.hr_size), mode="nearest",
    )
    shape = (1, c, sr_cfg.hr_size, sr_cfg.hr_size)
    pixels = ddim_sample(denoiser, cond, schedule, shape, steps=sr_cfg.sampler_steps,
                         generator=generator).squeeze(0)
    raw = denormalize_array(pixels, stats)
    return MultispectralImage(
        pixels=raw, wavelengths=lr_img.wavelengths, modality=lr_img.modality,
        acquisition_date=lr_img.acquisition_date, value_space=ValueSpace.RAW,
    )


def load_denoiser(path: str | Path) -> tuple[DenoiserUNet, dict]:
    configs, tensors = load_checkpoint(path)
    if configs.get("kind") != "unet":
        raise ConfigError(f"{path}: checkpoint is not a denoiser")
    denoiser = DenoiserUNet(UNetConfig.from_dict(configs["unet"]))
    denoiser.load_state_dict(tensors)
    denoiser.eval()
    return denoiser, configs
