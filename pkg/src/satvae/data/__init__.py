"""Dataset ingestion, normalization, harmonization, and splitting."""

from .bands import BAND_TOLERANCE_NM, NIR_NM, RED_NM, find_band, ndvi
from .harmonize import (
    BASELINE_OFFSET_DN,
    DEFAULT_THRESHOLD_DN,
    detect_baseline_shift,
    harmonize_corpus,
    minimum_series,
)
from .split import SplitRatios, cell_of, checkerboard_split
from .stats import (
    STD_FLOOR,
    ConstantChannelWarning,
    compute_stats,
    denormalize,
    denormalize_array,
    normalize,
    normalize_array,
)
from .synthetic import make_image, make_recon_corpus, make_sr_corpus, smooth_field
from .tiles import load_tile, read_header, save_tile
from .types import (
    BaselineReport,
    DatasetManifest,
    ManifestEntry,
    Modality,
    MultispectralImage,
    NormalizationStats,
    RGB_WAVELENGTHS_NM,
    RGBN_WAVELENGTHS_NM,
    S1RTC_PSEUDO_WAVELENGTHS_NM,
    S2L2A_WAVELENGTHS_NM,
    Split,
    ValueSpace,
    WavelengthProfile,
)

__all__ = [
    "BAND_TOLERANCE_NM", "NIR_NM", "RED_NM", "find_band", "ndvi",
    "BASELINE_OFFSET_DN", "DEFAULT_THRESHOLD_DN",
    "detect_baseline_shift", "harmonize_corpus", "minimum_series",
    "SplitRatios", "cell_of", "checkerboard_split",
    "STD_FLOOR", "ConstantChannelWarning", "compute_stats",
    "normalize", "denormalize", "normalize_array", "denormalize_array",
    "make_image", "make_recon_corpus", "make_sr_corpus", "smooth_field",
    "load_tile", "read_header", "save_tile",
    "BaselineReport", "DatasetManifest", "ManifestEntry", "Modality",
    "MultispectralImage", "NormalizationStats", "Split", "ValueSpace",
    "WavelengthProfile",
    "RGB_WAVELENGTHS_NM", "RGBN_WAVELENGTHS_NM",
    "S1RTC_PSEUDO_WAVELENGTHS_NM", "S2L2A_WAVELENGTHS_NM",
]
