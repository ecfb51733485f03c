"""Checkerboard-style geospatial splitting.

Tiles are bucketed into lon/lat grid cells; whole cells are assigned to
TRAIN/VAL/TEST so that no cell ever straddles two splits. Cells are
enumerated row-major, shuffled with a seeded RNG, then handed greedily to
whichever split is furthest below its target tile count. Deterministic given
(cell size, ratios, seed) and leakage-free by construction.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace

from ..exceptions import ManifestError
from .types import DatasetManifest, Split


@dataclass(frozen=True)
class SplitRatios:
    """Target TRAIN/VAL/TEST fractions; normalized on construction."""

    train: float = 0.848
    val: float = 0.101
    test: float = 0.051

    def __post_init__(self):
        total = self.train + self.val + self.test
        if total <= 0 or min(self.train, self.val, self.test) < 0:
            raise ValueError("split ratios must be nonnegative with positive sum")
        object.__setattr__(self, "train", self.train / total)
        object.__setattr__(self, "val", self.val / total)
        object.__setattr__(self, "test", self.test / total)

    @classmethod
    def from_counts(cls, train: int, val: int, test: int) -> "SplitRatios":
        return cls(float(train), float(val), float(test))

    def as_dict(self) -> dict[Split, float]:
        return {Split.TRAIN: self.train, Split.VAL: self.val, Split.TEST: self.test}


def cell_of(lon: float, lat: float, cell_size_deg: float) -> tuple[int, int]:
    return (math.floor(lat / cell_size_deg), math.floor(lon / cell_size_deg))


def checkerboard_split(
    manifest: DatasetManifest,
    cell_size_deg: float,
    ratios: SplitRatios | None = None,
    seed: int = 0,
) -> DatasetManifest:
    """Assign every entry a split by the grid cell containing its centroid."""
    if cell_size_deg <= 0:
        raise ValueError("cell_size_deg must be positive")
    ratios = ratios or SplitRatios()

    cells: dict[tuple[int, int], list[int]] = {}
    for i, entry in enumerate(manifest.entries):
        if entry.lon is None or entry.lat is None:
            raise ManifestError(f"{entry.tile_path}: missing lon/lat coordinates")
        cells.setdefault(cell_of(entry.lon, entry.lat, cell_size_deg), []).append(i)

    # Row-major enumeration, then a seeded shuffle decoupled from insertion order.
    ordered = sorted(cells)
    rng = random.Random(seed)
    rng.shuffle(ordered)

    total = len(manifest.entries)
    targets = {s: frac * total for s, frac in ratios.as_dict().items()}
    assigned = {s: 0 for s in targets}

    cell_split: dict[tuple[int, int], Split] = {}
    for cell in ordered:
        # Ties break toward TRAIN then VAL by dict order, deterministically.
        best = max(targets, key=lambda s: targets[s] - assigned[s])
        cell_split[cell] = best
        assigned[best] += len(cells[cell])

    new_entries = list(manifest.entries)
    for cell, indices in cells.items():
        for i in indices:
            new_entries[i] = replace(new_entries[i], split=cell_split[cell])

    return DatasetManifest(entries=new_entries, stats_by_modality=dict(manifest.stats_by_modality))
