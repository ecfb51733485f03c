"""Channel-flexible VAE: dynamic stem/head hypernetworks + conv backbone."""

from .backbone import DecoderBackbone, EncoderBackbone, ResidualBlock, VAEConfig
from .checkpoint import load_checkpoint, load_vae, save_checkpoint, save_vae
from .hypernet import (
    DynamicConv,
    GeneratedConvWeights,
    HypernetConfig,
    WavelengthEmbedding,
    generate_head_weights,
    generate_stem_weights,
)
from .vae import (
    LatentCode,
    VAEModel,
    build_vae,
    decode,
    deterministic_encode,
    encode,
    kl_divergence,
    reconstruct,
    tiny_hypernet_config,
    tiny_vae_config,
)

__all__ = [
    "DecoderBackbone", "EncoderBackbone", "ResidualBlock", "VAEConfig",
    "load_checkpoint", "load_vae", "save_checkpoint", "save_vae",
    "DynamicConv", "GeneratedConvWeights", "HypernetConfig",
    "WavelengthEmbedding", "generate_head_weights", "generate_stem_weights",
    "LatentCode", "VAEModel", "build_vae", "decode", "deterministic_encode",
    "encode", "kl_divergence", "reconstruct",
    "tiny_hypernet_config", "tiny_vae_config",
]
