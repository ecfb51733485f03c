"""Detection and correction of the Sentinel-2 processing-baseline offset.

Post-2022 S2L2A tiles can encode reflectance down to about -1000 DN while
older tiles floor near zero, leaving two value populations in one corpus.
The detector flags tiles purely from value statistics (per-tile minimum
against a threshold), so the exact switchover date never matters. Correction
shifts flagged tiles by +1000 DN and clips at 0, aligning everything to the
pre-baseline [0, 10000] convention.
"""

from __future__ import annotations

import datetime as dt
import shutil
from dataclasses import replace
from pathlib import Path

import torch

from ..exceptions import ManifestError, UnsupportedModalityError
from .tiles import load_tile, save_tile
from .types import BaselineReport, DatasetManifest, Modality

DEFAULT_THRESHOLD_DN = -50.0
BASELINE_OFFSET_DN = 1000.0


def detect_baseline_shift(
    manifest: DatasetManifest,
    threshold: float = DEFAULT_THRESHOLD_DN,
    modality: Modality = Modality.S2L2A,
) -> list[BaselineReport]:
    """One report per S2L2A tile; flagged when the tile minimum sits below
    the detector threshold (default -50 DN: far below sensor noise around 0,
    far above the -1000 offset population)."""
    if modality is not Modality.S2L2A:
        raise UnsupportedModalityError(
            f"baseline-shift detection is defined for S2L2A, not {modality.value}"
        )
    if threshold >= 0:
        raise ValueError("threshold must be negative (offset population sits near -1000)")

    reports = []
    for entry in manifest.of_modality(modality):
        img = load_tile(entry.tile_path)
        tile_min = float(img.pixels.min())
        reports.append(
            BaselineReport(
                tile_path=entry.tile_path,
                min_value=tile_min,
                flagged_post_baseline=tile_min < threshold,
                acquisition_date=entry.acquisition_date,
            )
        )
    return reports


def minimum_series(reports: list[BaselineReport]) -> list[tuple[dt.date | None, float]]:
    """(date, per-tile minimum) pairs sorted by date, for the minimum-over-time plot."""
    dated = sorted(
        (r for r in reports if r.acquisition_date is not None),
        key=lambda r: r.acquisition_date,
    )
    undated = [r for r in reports if r.acquisition_date is None]
    return [(r.acquisition_date, r.min_value) for r in dated + undated]


def harmonize_corpus(
    manifest: DatasetManifest,
    reports: list[BaselineReport],
    out_dir: str | Path,
) -> tuple[DatasetManifest, list[BaselineReport]]:
    """Rewrite the corpus with flagged tiles shifted by +1000 DN and clipped at 0.

    Unflagged tiles are copied byte-for-byte. Returns a new manifest rooted at
    ``out_dir`` with per-modality stats dropped (they must be recomputed) and
    the reports with ``offset_applied`` recorded.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    by_path = {r.tile_path: r for r in reports}
    s2_paths = {e.tile_path for e in manifest.of_modality(Modality.S2L2A)}
    if set(by_path) != s2_paths:
        missing = s2_paths - set(by_path)
        extra = set(by_path) - s2_paths
        raise ManifestError(
            f"reports do not match the manifest's S2L2A tiles "
            f"(missing {len(missing)}, extraneous {len(extra)})"
        )

    new_entries = []
    new_reports = []
    used_names: set[str] = set()
    for i, entry in enumerate(manifest.entries):
        src = Path(entry.tile_path)
        name = src.name if src.name not in used_names else f"{i:06d}_{src.name}"
        used_names.add(name)
        dst = out_dir / name
        report = by_path.get(entry.tile_path)
        if report is not None and report.flagged_post_baseline:
            img = load_tile(src)
            corrected = torch.clamp(img.pixels + BASELINE_OFFSET_DN, min=0.0)
            save_tile(img.with_pixels(corrected), dst)
            new_reports.append(replace(report, offset_applied=BASELINE_OFFSET_DN))
        else:
            shutil.copyfile(src, dst)
            if report is not None:
                new_reports.append(replace(report, offset_applied=0.0))
        new_entries.append(replace(entry, tile_path=str(dst)))

    harmonized = DatasetManifest(entries=new_entries, stats_by_modality={})
    return harmonized, new_reports
