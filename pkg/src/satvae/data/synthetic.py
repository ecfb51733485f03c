"""Synthetic tile corpora so every experiment runs without external downloads.

Tiles are smooth random fields (mixtures of 2-D Gaussian bumps over a gentle
gradient) with per-channel amplitudes, which keeps desk-scale models able to
overfit them quickly while still exercising spectral structure. Generators
can plant a -1000 DN offset subpopulation to exercise baseline harmonization
and can emit paired LR/HR tiles for super-resolution.
"""

from __future__ import annotations

import datetime as dt
from pathlib import Path

import torch
import torch.nn.functional as F

from ..seeding import make_generator
from .tiles import save_tile
from .types import (
    DatasetManifest,
    ManifestEntry,
    Modality,
    MultispectralImage,
    Split,
    ValueSpace,
    WavelengthProfile,
)


def smooth_field(
    channels: int,
    height: int,
    width: int,
    generator: torch.Generator,
    bumps: int = 6,
    low: float = 0.0,
    high: float = 1.0,
    min_sigma: float = 0.08,
) -> torch.Tensor:
    """Band-limited random raster in [low, high] with cross-channel structure."""
    ys = torch.linspace(0.0, 1.0, height).view(-1, 1)
    xs = torch.linspace(0.0, 1.0, width).view(1, -1)
    base = torch.zeros(channels, height, width)

    # Shared spatial bumps with per-channel amplitudes give each pixel a
    # spectral signature that varies across the scene.
    for _ in range(bumps):
        cx, cy = torch.rand(2, generator=generator).tolist()
        sigma = min_sigma + 0.25 * torch.rand(1, generator=generator).item()
        blob = torch.exp(-(((xs - cx) ** 2) + ((ys - cy) ** 2)) / (2 * sigma**2))
        amps = 0.2 + torch.rand(channels, generator=generator)
        base += amps.view(-1, 1, 1) * blob

    slope = torch.rand(channels, 2, generator=generator) - 0.5
    base += slope[:, :1, None] * xs + slope[:, 1:, None] * ys

    lo = base.amin(dim=(1, 2), keepdim=True)
    hi = base.amax(dim=(1, 2), keepdim=True)
    unit = (base - lo) / torch.clamp(hi - lo, min=1e-6)
    return low + (high - low) * unit


def make_image(
    modality: Modality,
    height: int,
    width: int,
    generator: torch.Generator,
    wavelengths: WavelengthProfile | None = None,
    low: float = 0.0,
    high: float = 10_000.0,
    offset_dn: float = 0.0,
    acquisition_date: dt.date | None = None,
    bumps: int = 6,
    min_sigma: float = 0.08,
) -> MultispectralImage:
    profile = wavelengths or WavelengthProfile.for_modality(modality)
    pixels = smooth_field(len(profile), height, width, generator, bumps=bumps,
                          low=low, high=high, min_sigma=min_sigma)
    if offset_dn:
        pixels = pixels + offset_dn
    return MultispectralImage(
        pixels=pixels.to(torch.float32),
        wavelengths=profile,
        modality=modality,
        acquisition_date=acquisition_date,
        value_space=ValueSpace.RAW,
    )


def make_recon_corpus(
    out_dir: str | Path,
    seed: int = 0,
    n_s2: int = 16,
    n_rgbn: int = 16,
    size: int = 64,
    offset_fraction: float = 0.5,
) -> DatasetManifest:
    """Mixed S2L2A + RGBN corpus; a fraction of the S2 tiles carry the
    post-baseline -1000 DN offset (those get post-2022 dates)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gen = make_generator(seed)
    entries = []

    n_offset = round(n_s2 * offset_fraction)
    for i in range(n_s2):
        offset = i < n_offset
        date = dt.date(2023, 3, 1) if offset else dt.date(2020, 6, 1)
        img = make_image(
            Modality.S2L2A, size, size, gen,
            low=0.0, high=9_000.0,
            offset_dn=-1000.0 if offset else 0.0,
            acquisition_date=date + dt.timedelta(days=7 * i),
        )
        path = out_dir / f"s2_{i:04d}.eovt"
        save_tile(img, path)
        entries.append(
            ManifestEntry(
                tile_path=str(path), modality=Modality.S2L2A,
                acquisition_date=img.acquisition_date,
                lon=float(5.0 + (i % 8) * 0.5), lat=float(40.0 + (i // 8) * 0.5),
            )
        )

    for i in range(n_rgbn):
        img = make_image(
            Modality.RGBN, size, size, gen,
            low=0.0, high=1.0,
            acquisition_date=dt.date(2021, 1, 1) + dt.timedelta(days=11 * i),
        )
        path = out_dir / f"rgbn_{i:04d}.eovt"
        save_tile(img, path)
        entries.append(
            ManifestEntry(
                tile_path=str(path), modality=Modality.RGBN,
                acquisition_date=img.acquisition_date,
                lon=float(5.0 + (i % 8) * 0.5), lat=float(40.0 + (i // 8) * 0.5),
            )
        )

    manifest = DatasetManifest(entries=entries)
    manifest.save(out_dir / "manifest.json")
    return manifest


def field_mosaic(
    channels: int,
    size: int,
    generator: torch.Generator,
    regions: int = 9,
    grid: int = 8,
) -> torch.Tensor:
    """Sharp-edged mosaic of spectrally distinct patches over a gentle base.

    Mimics agricultural scenes: piecewise-constant band ratios with crisp
    boundaries (snapped to a coarse grid). Smooth interpolation of a
    downsampled mosaic blurs spectra across the edges, which is exactly the
    structure a super-resolver must restore.
    """
    base = smooth_field(channels, size, size, generator, bumps=3,
                        low=0.25, high=0.45, min_sigma=0.2)

    def snap(v: float) -> int:
        return max(grid, int(round(v / grid)) * grid)

    for _ in range(regions):
        coords = torch.rand(4, generator=generator)
        y0 = snap(float(coords[0]) * size * 0.8) % size
        x0 = snap(float(coords[1]) * size * 0.8) % size
        h = snap(size * (0.15 + 0.35 * float(coords[2])))
        w = snap(size * (0.15 + 0.35 * float(coords[3])))
        color = 0.1 + 0.8 * torch.rand(channels, generator=generator)
        base[:, y0:y0 + h, x0:x0 + w] = color.view(-1, 1, 1)

    # Thin stripes (roads/waterways): near-pure edge content that smooth
    # interpolation of a downsampled tile cannot restore.
    for _ in range(max(2, regions // 3)):
        coords = torch.rand(2, generator=generator)
        pos = snap(float(coords[0]) * size * 0.9) % (size - grid)
        color = 0.1 + 0.8 * torch.rand(channels, generator=generator)
        if float(coords[1]) < 0.5:
            base[:, pos:pos + grid, :] = color.view(-1, 1, 1)
        else:
            base[:, :, pos:pos + grid] = color.view(-1, 1, 1)
    return base


def make_sr_corpus(
    out_dir: str | Path,
    seed: int = 0,
    n_pairs: int = 8,
    hr_size: int = 128,
    scale: int = 4,
    regions: int = 9,
) -> DatasetManifest:
    """Paired LR/HR RGBN tiles; LR is an area-downsampled copy of HR."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gen = make_generator(seed)
    lr_size = hr_size // scale
    entries = []

    for i in range(n_pairs):
        profile = WavelengthProfile.for_modality(Modality.RGBN)
        hr = MultispectralImage(
            pixels=field_mosaic(len(profile), hr_size, gen, regions=regions),
            wavelengths=profile, modality=Modality.RGBN,
            acquisition_date=dt.date(2022, 5, 1), value_space=ValueSpace.RAW,
        )
        lr_pixels = F.avg_pool2d(hr.pixels.unsqueeze(0), kernel_size=scale).squeeze(0)
        lr = MultispectralImage(
            pixels=lr_pixels, wavelengths=hr.wavelengths, modality=hr.modality,
            acquisition_date=hr.acquisition_date, value_space=ValueSpace.RAW,
        )
        pair_id = f"pair_{i:04d}"
        hr_path = out_dir / f"hr_{i:04d}.eovt"
        lr_path = out_dir / f"lr_{i:04d}.eovt"
        save_tile(hr, hr_path)
        save_tile(lr, lr_path)
        lon, lat = float(10.0 + (i % 4) * 0.5), float(45.0 + (i // 4) * 0.5)
        for path in (hr_path, lr_path):
            entries.append(
                ManifestEntry(
                    tile_path=str(path), modality=Modality.RGBN,
                    acquisition_date=hr.acquisition_date,
                    lon=lon, lat=lat, split=Split.TRAIN, pair_id=pair_id,
                )
            )

    manifest = DatasetManifest(entries=entries)
    manifest.save(out_dir / "manifest.json")
    return manifest
