"""Core raster and manifest types for multispectral tiles.

A tile is a ``[C, H, W]`` float32 tensor plus per-channel wavelength metadata
and a value-space tag. The tag is the state machine guarding z-score
normalization: RAW reflectance-like values enter, NORMALIZED values feed the
models, and only :mod:`satvae.data.stats` flips the tag.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import torch

from ..exceptions import ManifestError, ShapeMismatchError


class Modality(Enum):
    S2L2A = "S2L2A"
    S1RTC = "S1RTC"
    RGBN = "RGBN"
    RGB = "RGB"
    OTHER = "OTHER"


class ValueSpace(Enum):
    RAW = "RAW"
    NORMALIZED = "NORMALIZED"


class Split(Enum):
    TRAIN = "TRAIN"
    VAL = "VAL"
    TEST = "TEST"
    UNASSIGNED = "UNASSIGNED"


# Sentinel-2 L2A band centers in nanometers (B01..B09, B11, B12).
S2L2A_WAVELENGTHS_NM = (
    443.0, 490.0, 560.0, 665.0, 705.0, 740.0,
    783.0, 842.0, 865.0, 940.0, 1610.0, 2190.0,
)
RGB_WAVELENGTHS_NM = (665.0, 560.0, 490.0)
RGBN_WAVELENGTHS_NM = (665.0, 560.0, 490.0, 842.0)
# SAR has no optical center wavelength; VV/VH get distinct sentinels in the
# C-band regime (configurable at call sites that build profiles).
S1RTC_PSEUDO_WAVELENGTHS_NM = (5_500_000.0, 5_700_000.0)

DEFAULT_WAVELENGTHS_NM = {
    Modality.S2L2A: S2L2A_WAVELENGTHS_NM,
    Modality.S1RTC: S1RTC_PSEUDO_WAVELENGTHS_NM,
    Modality.RGBN: RGBN_WAVELENGTHS_NM,
    Modality.RGB: RGB_WAVELENGTHS_NM,
}


@dataclass(frozen=True)
class WavelengthProfile:
    """Ordered channel center wavelengths in nanometers."""

    centers: tuple[float, ...]

    def __post_init__(self):
        centers = tuple(float(c) for c in self.centers)
        object.__setattr__(self, "centers", centers)
        if len(centers) == 0:
            raise ValueError("wavelength profile must contain at least one channel")
        for c in centers:
            if not (0.0 < c < float("inf")):
                raise ValueError(f"wavelengths must be finite and positive, got {c}")

    def __len__(self) -> int:
        return len(self.centers)

    def __getitem__(self, i: int) -> float:
        return self.centers[i]

    def as_tensor(self, dtype: torch.dtype = torch.float32) -> torch.Tensor:
        return torch.tensor(self.centers, dtype=dtype)

    def permuted(self, order: list[int]) -> "WavelengthProfile":
        return WavelengthProfile(tuple(self.centers[i] for i in order))

    @classmethod
    def for_modality(cls, modality: Modality) -> "WavelengthProfile":
        try:
            return cls(DEFAULT_WAVELENGTHS_NM[modality])
        except KeyError:
            raise ValueError(f"no default wavelengths for modality {modality}")


@dataclass
class MultispectralImage:
    """A ``[C, H, W]`` raster with wavelength metadata and value-space tag."""

    pixels: torch.Tensor
    wavelengths: WavelengthProfile
    modality: Modality = Modality.OTHER
    acquisition_date: dt.date | None = None
    value_space: ValueSpace = ValueSpace.RAW

    def __post_init__(self):
        if self.pixels.ndim != 3:
            raise ShapeMismatchError(
                f"pixels must be [C, H, W], got shape {tuple(self.pixels.shape)}"
            )
        c, h, w = self.pixels.shape
        if c < 1 or h < 1 or w < 1:
            raise ShapeMismatchError(f"degenerate image shape {(c, h, w)}")
        if c != len(self.wavelengths):
            raise ShapeMismatchError(
                f"{c} channels but {len(self.wavelengths)} wavelengths"
            )
        if not torch.isfinite(self.pixels).all():
            raise ValueError("image contains non-finite pixel values")

    @property
    def channels(self) -> int:
        return self.pixels.shape[0]

    @property
    def height(self) -> int:
        return self.pixels.shape[1]

    @property
    def width(self) -> int:
        return self.pixels.shape[2]

    def with_pixels(self, pixels: torch.Tensor, value_space: ValueSpace | None = None) -> "MultispectralImage":
        return replace(
            self, pixels=pixels,
            value_space=self.value_space if value_space is None else value_space,
        )


@dataclass
class NormalizationStats:
    """Per-channel z-score statistics for one modality's training corpus."""

    mean: list[float]
    std: list[float]
    source_corpus_id: str = ""
    channel_count: int = 0

    def __post_init__(self):
        self.mean = [float(m) for m in self.mean]
        self.std = [float(s) for s in self.std]
        if self.channel_count == 0:
            self.channel_count = len(self.mean)
        if len(self.mean) != self.channel_count or len(self.std) != self.channel_count:
            raise ShapeMismatchError("mean/std length must equal channel_count")
        if any(s <= 0.0 for s in self.std):
            raise ValueError("std must be positive for every channel")

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std": self.std,
            "source_corpus_id": self.source_corpus_id,
            "channel_count": self.channel_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationStats":
        return cls(
            mean=d["mean"], std=d["std"],
            source_corpus_id=d.get("source_corpus_id", ""),
            channel_count=d.get("channel_count", 0),
        )


@dataclass
class ManifestEntry:
    """One tile record: path, modality, acquisition metadata, split."""

    tile_path: str
    modality: Modality
    acquisition_date: dt.date | None = None
    lon: float | None = None
    lat: float | None = None
    split: Split = Split.UNASSIGNED
    pair_id: str | None = None

    def to_dict(self) -> dict:
        return {
            "tile_path": self.tile_path,
            "modality": self.modality.value,
            "acquisition_date": self.acquisition_date.isoformat() if self.acquisition_date else None,
            "lon": self.lon,
            "lat": self.lat,
            "split": self.split.value,
            "pair_id": self.pair_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ManifestEntry":
        date = d.get("acquisition_date")
        return cls(
            tile_path=d["tile_path"],
            modality=Modality(d["modality"]),
            acquisition_date=dt.date.fromisoformat(date) if date else None,
            lon=d.get("lon"),
            lat=d.get("lat"),
            split=Split(d.get("split", "UNASSIGNED")),
            pair_id=d.get("pair_id"),
        )


@dataclass
class DatasetManifest:
    """File-backed index of tiles plus per-modality normalization stats."""

    entries: list[ManifestEntry] = field(default_factory=list)
    stats_by_modality: dict[Modality, NormalizationStats] = field(default_factory=dict)

    def __post_init__(self):
        paths = [e.tile_path for e in self.entries]
        if len(paths) != len(set(paths)):
            raise ManifestError("tile paths in a manifest must be unique")

    def of_modality(self, modality: Modality) -> list[ManifestEntry]:
        return [e for e in self.entries if e.modality == modality]

    def of_split(self, split: Split, modality: Modality | None = None) -> list[ManifestEntry]:
        out = [e for e in self.entries if e.split == split]
        if modality is not None:
            out = [e for e in out if e.modality == modality]
        return out

    @property
    def modalities(self) -> list[Modality]:
        seen: list[Modality] = []
        for e in self.entries:
            if e.modality not in seen:
                seen.append(e.modality)
        return seen

    def to_dict(self) -> dict:
        return {
            "entries": [e.to_dict() for e in self.entries],
            "stats_by_modality": {
                m.value: s.to_dict() for m, s in self.stats_by_modality.items()
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        return cls(
            entries=[ManifestEntry.from_dict(e) for e in d.get("entries", [])],
            stats_by_modality={
                Modality(k): NormalizationStats.from_dict(v)
                for k, v in d.get("stats_by_modality", {}).items()
            },
        )

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(json.dumps(self.to_dict(), indent=2))
        tmp.replace(path)

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (json.JSONDecodeError, KeyError, ValueError) as err:
            raise ManifestError(f"cannot parse manifest {path}: {err}") from err


@dataclass
class BaselineReport:
    """Per-tile verdict of the processing-baseline offset detector."""

    tile_path: str
    min_value: float
    flagged_post_baseline: bool
    offset_applied: float = 0.0
    acquisition_date: dt.date | None = None

    def __post_init__(self):
        if self.offset_applied not in (0.0, 1000.0):
            raise ValueError("offset_applied must be 0 or +1000")
