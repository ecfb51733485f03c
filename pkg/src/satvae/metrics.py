"""Reconstruction-quality metrics and dataset-level evaluation.

RMSE/PSNR/SAM/NDVI-MAE are reporting metrics returning floats; SSIM and
MS-SSIM return 0-dim tensors so the training loss can differentiate through
them. Every metric has a loop-based reference twin in the test suite and the
two are held together within 1e-6.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import torch
import torch.nn.functional as F

from .data.bands import ndvi
from .data.stats import denormalize, normalize
from .data.tiles import load_tile
from .data.types import (
    DatasetManifest,
    Modality,
    MultispectralImage,
    NormalizationStats,
    Split,
)
from .exceptions import (
    DegenerateMetricError,
    EmptyCorpusError,
    ShapeMismatchError,
    UndefinedPeakError,
)

PSNR_CAP_DB = 100.0
SAM_EPS = 1e-12
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


class ScaleReductionWarning(UserWarning):
    """MS-SSIM ran with fewer scales than requested (image too small)."""


def _check_shapes(x: torch.Tensor, y: torch.Tensor) -> None:
    if x.shape != y.shape:
        raise ShapeMismatchError(f"shape mismatch: {tuple(x.shape)} vs {tuple(y.shape)}")


def rmse(x: torch.Tensor, y: torch.Tensor) -> float:
    """sqrt(mean((x - y)^2)) over all elements."""
    _check_shapes(x, y)
    diff = (x.to(torch.float64) - y.to(torch.float64))
    return float(torch.sqrt((diff * diff).mean()))


def psnr(x: torch.Tensor, y: torch.Tensor, peak: float | str = "auto") -> float:
    """10 log10(peak^2 / MSE) in dB, capped at 100 dB.

    ``peak='auto'`` uses the dynamic range (max - min) of the reference x.
    """
    _check_shapes(x, y)
    if peak == "auto":
        peak_val = float(x.max() - x.min())
        if peak_val <= 0.0:
            raise UndefinedPeakError("constant reference image has no dynamic range")
    else:
        peak_val = float(peak)
        if peak_val <= 0.0:
            raise UndefinedPeakError(f"peak must be positive, got {peak_val}")
    mse = float(((x.to(torch.float64) - y.to(torch.float64)) ** 2).mean())
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(peak_val * peak_val / mse), PSNR_CAP_DB)


def gaussian_window(size: int, sigma: float, dtype: torch.dtype) -> torch.Tensor:
    """Normalized 2-D Gaussian window [size, size]."""
    coords = torch.arange(size, dtype=dtype) - (size - 1) / 2.0
    g = torch.exp(-(coords * coords) / (2.0 * sigma * sigma))
    g = g / g.sum()
    return g.view(-1, 1) * g.view(1, -1)


def _effective_window(h: int, w: int, requested: int) -> int:
    win = min(requested, h, w)
    if win % 2 == 0:
        win -= 1
    if win < 3:
        raise ShapeMismatchError(f"image {h}x{w} smaller than the minimum SSIM window")
    return win


def _as_batched(x: torch.Tensor) -> torch.Tensor:
    if x.ndim == 3:
        return x.unsqueeze(0)
    if x.ndim == 4:
        return x
    raise ShapeMismatchError(f"expected [C,H,W] or [B,C,H,W], got {tuple(x.shape)}")


def _resolve_range(x: torch.Tensor, y: torch.Tensor, data_range: float | None) -> float:
    # Auto range spans both images so the metric stays symmetric in (x, y).
    if data_range is None:
        lo = min(float(x.min()), float(y.min()))
        hi = max(float(x.max()), float(y.max()))
        return max(hi - lo, 1e-12)
    return max(float(data_range), 1e-12)


def _window_moments(x: torch.Tensor, y: torch.Tensor, win: int):
    """Gaussian-window means, variances, and covariance over valid positions."""
    b, c, h, w = x.shape
    kernel = gaussian_window(win, SSIM_SIGMA, x.dtype).view(1, 1, win, win)
    xf = x.reshape(b * c, 1, h, w)
    yf = y.reshape(b * c, 1, h, w)

    mu_x = F.conv2d(xf, kernel)
    mu_y = F.conv2d(yf, kernel)
    var_x = F.conv2d(xf * xf, kernel) - mu_x * mu_x
    var_y = F.conv2d(yf * yf, kernel) - mu_y * mu_y
    cov = F.conv2d(xf * yf, kernel) - mu_x * mu_y
    return mu_x, mu_y, var_x, var_y, cov


def _ssim_terms(
    x: torch.Tensor,
    y: torch.Tensor,
    win: int,
    data_range: float,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Mean luminance and contrast-structure terms over the valid window map."""
    mu_x, mu_y, var_x, var_y, cov = _window_moments(x, y, win)
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    lum = (2 * mu_x * mu_y + c1) / (mu_x * mu_x + mu_y * mu_y + c1)
    cs = (2 * cov + c2) / (var_x + var_y + c2)
    return lum.mean(), cs.mean()


def ssim(
    x: torch.Tensor,
    y: torch.Tensor,
    data_range: float | None = None,
    window: int = SSIM_WINDOW,
) -> torch.Tensor:
    """Gaussian-window SSIM averaged over channels; symmetric in (x, y).

    The window shrinks to the largest odd size fitting the image, so small
    test rasters (e.g. 8x8) remain measurable with a 7-pixel window.
    """
    _check_shapes(x, y)
    xb, yb = _as_batched(x), _as_batched(y)
    win = _effective_window(xb.shape[-2], xb.shape[-1], window)
    rng = _resolve_range(xb.detach(), yb.detach(), data_range)
    return _ssim_mean(xb, yb, win, rng)


def _ssim_mean(x: torch.Tensor, y: torch.Tensor, win: int, data_range: float) -> torch.Tensor:
    mu_x, mu_y, var_x, var_y, cov = _window_moments(x, y, win)
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    ssim_map = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
        (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    )
    return ssim_map.mean()


def ms_ssim(
    x: torch.Tensor,
    y: torch.Tensor,
    data_range: float | None = None,
    scales: int = 5,
    weights: tuple[float, ...] = MS_SSIM_WEIGHTS,
    window: int = SSIM_WINDOW,
) -> torch.Tensor:
    """Multiscale SSIM: product of contrast-structure terms across dyadic
    scales, luminance applied at the coarsest.

    Scales shrink (with renormalized weights and a warning) until the
    coarsest image still fits an 11-pixel window; below that the metric
    falls back to single-scale SSIM. Negative terms are floored at a tiny
    positive value before exponentiation, so the result lies in [0, 1].
    """
    _check_shapes(x, y)
    xb, yb = _as_batched(x), _as_batched(y)
    h, w = xb.shape[-2], xb.shape[-1]

    usable = 0
    for s in range(1, scales + 1):
        if min(h, w) // (2 ** (s - 1)) >= window:
            usable = s
    if usable == 0:
        warnings.warn(
            f"image {h}x{w} below the {window}px window at every scale; "
            "falling back to single-scale SSIM",
            ScaleReductionWarning,
            stacklevel=2,
        )
        return ssim(x, y, data_range=data_range, window=window)
    if usable < scales:
        warnings.warn(
            f"reducing MS-SSIM scales {scales} -> {usable} for {h}x{w} input",
            ScaleReductionWarning,
            stacklevel=2,
        )

    wts = torch.tensor(weights[:usable], dtype=xb.dtype)
    wts = wts / wts.sum()
    rng = _resolve_range(xb.detach(), yb.detach(), data_range)

    terms = []
    cur_x, cur_y = xb, yb
    for s in range(usable):
        lum, cs = _ssim_terms(cur_x, cur_y, window, rng)
        terms.append(lum * cs if s == usable - 1 else cs)
        if s < usable - 1:
            cur_x = F.avg_pool2d(cur_x, kernel_size=2)
            cur_y = F.avg_pool2d(cur_y, kernel_size=2)

    out = torch.ones((), dtype=xb.dtype)
    for t, wgt in zip(terms, wts):
        # Tiny positive floor keeps fractional powers (and their gradients)
        # finite when anticorrelation drives a term negative.
        out = out * torch.clamp(t, min=1e-12) ** wgt
    return out


def sam(x: torch.Tensor, y: torch.Tensor) -> float:
    """Mean spectral angle (radians) between per-pixel spectra.

    Pixels where either spectral vector is all-zero are skipped; if every
    pixel is degenerate the metric is undefined.
    """
    _check_shapes(x, y)
    if x.ndim != 3 or x.shape[0] < 2:
        raise ShapeMismatchError("SAM needs a [C,H,W] image with C >= 2")
    xv = x.to(torch.float64).reshape(x.shape[0], -1)
    yv = y.to(torch.float64).reshape(y.shape[0], -1)
    nx = torch.linalg.vector_norm(xv, dim=0)
    ny = torch.linalg.vector_norm(yv, dim=0)
    valid = (nx > 0) & (ny > 0)
    if not bool(valid.any()):
        raise DegenerateMetricError("all pixels have a zero spectral vector")
    dot = (xv * yv).sum(dim=0)
    cosine = torch.clamp(dot / (nx * ny + SAM_EPS), -1.0, 1.0)
    angles = torch.arccos(cosine[valid])
    return float(angles.mean())


def ndvi_mae(x: MultispectralImage, y: MultispectralImage) -> float:
    """Mean absolute NDVI error between two RAW-space images."""
    return float((ndvi(x).to(torch.float64) - ndvi(y).to(torch.float64)).abs().mean())


@dataclass
class MetricReport:
    """Per-image metric values plus dataset means for one modality."""

    modality: Modality
    per_image: list[dict] = field(default_factory=list)
    means: dict = field(default_factory=dict)
    image_count: int = 0

    METRIC_ORDER = ("rmse", "psnr_db", "ssim", "ms_ssim", "sam_rad", "ndvi_mae")

    def aggregate(self) -> None:
        """Unweighted mean over images for each metric present in every image."""
        self.image_count = len(self.per_image)
        self.means = {}
        for key in self.METRIC_ORDER:
            values = [rec[key] for rec in self.per_image if key in rec]
            if values and len(values) == self.image_count:
                self.means[key] = sum(values) / len(values)

    def to_json_lines(self) -> str:
        return "\n".join(json.dumps(rec) for rec in self.per_image)

    def to_dict(self) -> dict:
        return {
            "modality": self.modality.value,
            "image_count": self.image_count,
            "means": self.means,
            "per_image": self.per_image,
        }


def image_metrics(
    reference: MultispectralImage,
    candidate: MultispectralImage,
    include_ndvi: bool | None = None,
) -> dict:
    """All applicable metrics for one reference/candidate pair."""
    x, y = reference.pixels.to(torch.float64), candidate.pixels.to(torch.float64)
    rec = {
        "rmse": rmse(x, y),
        "psnr_db": psnr(x, y, peak="auto"),
        "ssim": float(ssim(x, y)),
        "ms_ssim": float(ms_ssim(x, y)),
    }
    if reference.channels >= 2:
        rec["sam_rad"] = sam(x, y)
    want_ndvi = include_ndvi
    if want_ndvi is None:
        try:
            rec["ndvi_mae"] = ndvi_mae(reference, candidate)
        except Exception:
            pass
    elif want_ndvi:
        rec["ndvi_mae"] = ndvi_mae(reference, candidate)
    return rec


def evaluate_dataset(
    model,
    manifest: DatasetManifest,
    modality: Modality,
    stats: NormalizationStats | None = None,
    split: Split = Split.TEST,
    space: str = "raw",
) -> MetricReport:
    """Reconstruct every tile of a split (posterior mean) and score it.

    ``model`` is either a VAE exposing ``reconstruct_image`` or any callable
    mapping a NORMALIZED image to a NORMALIZED image (used by oracle tests).
    Metrics default to denormalized RAW space so NDVI stays physical;
    ``space='normalized'`` scores in z-units instead.
    """
    if space not in ("raw", "normalized"):
        raise ValueError(f"space must be 'raw' or 'normalized', got {space!r}")
    entries = manifest.of_split(split, modality)
    if not entries:
        raise EmptyCorpusError(f"no {split.value} tiles of modality {modality.value}")
    if stats is None:
        stats = manifest.stats_by_modality.get(modality)
    if stats is None:
        raise EmptyCorpusError(f"no normalization stats for {modality.value}")

    if hasattr(model, "reconstruct_image"):
        reconstruct_fn: Callable = lambda img: model.reconstruct_image(img, mode="mean")
    else:
        reconstruct_fn = model

    report = MetricReport(modality=modality)
    for entry in entries:
        raw = load_tile(entry.tile_path)
        normed = normalize(raw, stats)
        recon_normed = reconstruct_fn(normed)
        if space == "raw":
            reference, candidate = raw, denormalize(recon_normed, stats)
        else:
            reference, candidate = normed, recon_normed
        rec = {"tile_path": entry.tile_path}
        rec.update(image_metrics(reference, candidate))
        report.per_image.append(rec)
    report.aggregate()
    return report


_COLUMNS = (
    ("rmse", "RMSE", "{:.4f}"),
    ("psnr_db", "PSNR", "{:.2f}"),
    ("ssim", "SSIM", "{:.4f}"),
    ("sam_rad", "SAM", "{:.4f}"),
    ("ndvi_mae", "NDVI-MAE", "{:.4f}"),
)


def format_table(reports: list[MetricReport]) -> str:
    """Aligned text table, one row per modality, Table-style column order."""
    cols = [c for c in _COLUMNS if any(c[0] in r.means for r in reports)]
    header = ["Modality", "N"] + [c[1] for c in cols]
    rows = []
    for r in reports:
        row = [r.modality.value, str(r.image_count)]
        for key, _, fmt in cols:
            row.append(fmt.format(r.means[key]) if key in r.means else "-")
        rows.append(row)
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h)
              for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)))
    return "\n".join(lines)


def save_report(reports: list[MetricReport], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"reports": [r.to_dict() for r in reports]}
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2))
    tmp.replace(path)
