"""Exception hierarchy shared across the toolkit.

Every error surfaced to the CLI maps to one of these so the dispatcher can
translate failures into stable exit codes (usage=2, config=3, runtime=1).
"""


class SatVAEError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SatVAEError):
    """Invalid or inconsistent configuration (CLI exit code 3)."""


class ShapeMismatchError(SatVAEError):
    """Tensor or channel shapes disagree with the operation's contract."""


class ValueSpaceError(SatVAEError):
    """Operation applied to an image in the wrong value space (RAW vs NORMALIZED)."""


class EmptyCorpusError(SatVAEError):
    """No tiles available for the requested modality/split."""


class UnsupportedModalityError(SatVAEError):
    """Operation only defined for a specific sensor modality."""


class ManifestError(SatVAEError):
    """Dataset manifest is incomplete or internally inconsistent."""


class MissingBandError(SatVAEError):
    """No spectral band within tolerance of a required wavelength."""


class TileFormatError(SatVAEError):
    """Tile container is corrupt, truncated, or disagrees with its header."""


class UndefinedPeakError(SatVAEError):
    """PSNR peak cannot be derived from a constant reference image."""


class DegenerateMetricError(SatVAEError):
    """Metric undefined because every pixel was degenerate (e.g. zero spectra)."""


class ScheduleRangeError(SatVAEError):
    """Requested diffusion time lies outside the schedule's [t_min, t_max]."""


class SamplerDivergenceError(SatVAEError):
    """Sampler produced a non-finite intermediate state."""


class TrainingDivergenceError(SatVAEError):
    """Training loss became non-finite; references the last good checkpoint."""

    def __init__(self, message: str, last_checkpoint: str | None = None):
        super().__init__(message)
        self.last_checkpoint = last_checkpoint
