"""Latent super-resolution diffusion: VP schedule, EDM loss, DDIM sampling."""

from .ddim import DiffusionState, ddim_sample
from .edm import edm_loss
from .schedule import NoiseSchedule, vp_schedule
from .sr import (
    LatentPairSet,
    SRPipelineConfig,
    SRTrainConfig,
    encode_pairs,
    infer_pixel_baseline,
    infer_sr,
    load_denoiser,
    paired_entries,
    pixel_pairs,
    train_pixel_baseline,
    train_sr,
)
from .unet import DenoiserUNet, UNetConfig, build_unet, sinusoidal_embedding, tiny_unet_config

__all__ = [
    "DiffusionState", "ddim_sample", "edm_loss", "NoiseSchedule", "vp_schedule",
    "LatentPairSet", "SRPipelineConfig", "SRTrainConfig",
    "encode_pairs", "infer_pixel_baseline", "infer_sr", "load_denoiser",
    "paired_entries", "pixel_pairs", "train_pixel_baseline", "train_sr",
    "DenoiserUNet", "UNetConfig", "build_unet", "sinusoidal_embedding",
    "tiny_unet_config",
]
