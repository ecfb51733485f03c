"""Band lookup and the vegetation index used for physical-consistency checks."""

from __future__ import annotations

import torch

from ..exceptions import MissingBandError, ValueSpaceError
from .types import MultispectralImage, ValueSpace, WavelengthProfile

RED_NM = 665.0
NIR_NM = 842.0
BAND_TOLERANCE_NM = 50.0
NDVI_EPS = 1e-8


def find_band(profile: WavelengthProfile, target_nm: float,
              tolerance_nm: float = BAND_TOLERANCE_NM) -> int:
    """Index of the channel whose center is nearest ``target_nm``.

    Nearest-center lookup keeps the index robust to per-sensor drift of band
    centers; anything farther than the tolerance is treated as absent.
    """
    distances = [abs(c - target_nm) for c in profile.centers]
    best = min(range(len(distances)), key=distances.__getitem__)
    if distances[best] > tolerance_nm:
        raise MissingBandError(
            f"no band within {tolerance_nm} nm of {target_nm} nm "
            f"(closest: {profile.centers[best]} nm)"
        )
    return best


def ndvi(img: MultispectralImage) -> torch.Tensor:
    """(NIR - Red) / (NIR + Red + eps) per pixel, computed in RAW space."""
    if img.value_space is not ValueSpace.RAW:
        raise ValueSpaceError("NDVI is defined on RAW reflectance-like values")
    red = img.pixels[find_band(img.wavelengths, RED_NM)].to(torch.float64)
    nir = img.pixels[find_band(img.wavelengths, NIR_NM)].to(torch.float64)
    return ((nir - red) / (nir + red + NDVI_EPS)).to(img.pixels.dtype)
