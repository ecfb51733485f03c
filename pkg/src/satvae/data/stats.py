"""Corpus statistics and z-score normalization.

Statistics are population moments (divide by N) accumulated in float64 over
every TRAIN pixel of a modality; stds are floored at ``STD_FLOOR`` so a
constant channel cannot poison the normalization.
"""

from __future__ import annotations

import warnings

import torch

from ..exceptions import EmptyCorpusError, ShapeMismatchError, ValueSpaceError
from .tiles import load_tile
from .types import (
    DatasetManifest,
    Modality,
    MultispectralImage,
    NormalizationStats,
    Split,
    ValueSpace,
)

STD_FLOOR = 1e-6


class ConstantChannelWarning(UserWarning):
    """A channel's std hit the floor; its normalized values are meaningless."""


def compute_stats(
    manifest: DatasetManifest,
    modality: Modality,
    corpus_id: str = "",
) -> NormalizationStats:
    """Per-channel mean/std over all TRAIN pixels of one modality."""
    entries = manifest.of_split(Split.TRAIN, modality)
    if not entries:
        raise EmptyCorpusError(f"no TRAIN tiles of modality {modality.value}")

    total = None
    total_sq = None
    count = 0
    for entry in entries:
        img = load_tile(entry.tile_path)
        if img.value_space is not ValueSpace.RAW:
            raise ValueSpaceError(f"{entry.tile_path}: stats require RAW tiles")
        px = img.pixels.to(torch.float64)
        if total is None:
            total = px.sum(dim=(1, 2))
            total_sq = (px * px).sum(dim=(1, 2))
        else:
            if px.shape[0] != total.shape[0]:
                raise ShapeMismatchError(
                    f"{entry.tile_path}: {px.shape[0]} channels, corpus has {total.shape[0]}"
                )
            total += px.sum(dim=(1, 2))
            total_sq += (px * px).sum(dim=(1, 2))
        count += px.shape[1] * px.shape[2]

    mean = total / count
    var = total_sq / count - mean * mean
    std = torch.sqrt(torch.clamp(var, min=0.0))

    floored = std < STD_FLOOR
    if floored.any():
        idx = torch.nonzero(floored).flatten().tolist()
        warnings.warn(
            f"std floored to {STD_FLOOR} for constant channel(s) {idx}",
            ConstantChannelWarning,
            stacklevel=2,
        )
        std = torch.clamp(std, min=STD_FLOOR)

    return NormalizationStats(
        mean=mean.tolist(),
        std=std.tolist(),
        source_corpus_id=corpus_id or f"{modality.value}:{len(entries)}tiles",
        channel_count=len(mean),
    )


def _check_channels(img: MultispectralImage, stats: NormalizationStats) -> None:
    if img.channels != stats.channel_count:
        raise ShapeMismatchError(
            f"image has {img.channels} channels, stats expect {stats.channel_count}"
        )


def normalize(img: MultispectralImage, stats: NormalizationStats) -> MultispectralImage:
    """``(x - mean) / std`` per channel; RAW -> NORMALIZED."""
    if img.value_space is not ValueSpace.RAW:
        raise ValueSpaceError("normalize expects a RAW-space image")
    _check_channels(img, stats)
    mean = torch.tensor(stats.mean, dtype=img.pixels.dtype).view(-1, 1, 1)
    std = torch.tensor(stats.std, dtype=img.pixels.dtype).view(-1, 1, 1)
    return img.with_pixels((img.pixels - mean) / std, ValueSpace.NORMALIZED)


def denormalize(img: MultispectralImage, stats: NormalizationStats) -> MultispectralImage:
    """Exact inverse of :func:`normalize`; NORMALIZED -> RAW."""
    if img.value_space is not ValueSpace.NORMALIZED:
        raise ValueSpaceError("denormalize expects a NORMALIZED-space image")
    _check_channels(img, stats)
    mean = torch.tensor(stats.mean, dtype=img.pixels.dtype).view(-1, 1, 1)
    std = torch.tensor(stats.std, dtype=img.pixels.dtype).view(-1, 1, 1)
    return img.with_pixels(img.pixels * std + mean, ValueSpace.RAW)


def normalize_array(pixels: torch.Tensor, stats: NormalizationStats) -> torch.Tensor:
    """Tensor-level normalize for batched [B, C, H, W] pipelines."""
    mean = torch.tensor(stats.mean, dtype=pixels.dtype).view(-1, 1, 1)
    std = torch.tensor(stats.std, dtype=pixels.dtype).view(-1, 1, 1)
    return (pixels - mean) / std


def denormalize_array(pixels: torch.Tensor, stats: NormalizationStats) -> torch.Tensor:
    mean = torch.tensor(stats.mean, dtype=pixels.dtype).view(-1, 1, 1)
    std = torch.tensor(stats.std, dtype=pixels.dtype).view(-1, 1, 1)
    return pixels * std + mean
