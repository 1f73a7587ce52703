"""Exception hierarchy shared by every chromalight module."""

from typing import Optional


class ChromaLightError(Exception):
    """Base class for all errors raised by chromalight."""


class InvalidInputError(ChromaLightError, ValueError):
    """An argument violates a documented precondition (negative radiance, bad range, ...)."""


class DimensionMismatchError(ChromaLightError, ValueError):
    """Two rasters (or a raster and a transport matrix) do not share a layout."""


class UndefinedMetricError(ChromaLightError):
    """A metric has no valid pixel to average over."""


class DegenerateFitError(ChromaLightError):
    """A least-squares color fit (or its inverse) is rank deficient."""

    def __init__(self, message: str, rank: Optional[int] = None):
        super().__init__(message)
        self.rank = rank


class DegenerateInputError(ChromaLightError):
    """An image carries no usable color information (for instance, all black)."""


class ImageFormatError(ChromaLightError):
    """A raster file cannot be decoded."""


class PFMHeaderError(ImageFormatError):
    pass


class PFMTruncatedError(ImageFormatError):
    pass


class PFMEndiannessError(ImageFormatError):
    pass


class UnsupportedBitDepthError(ImageFormatError):
    pass


class ZeroMedianError(ChromaLightError):
    """Tonemapping needs a positive median intensity to derive an exposure."""


class EstimatorFailureError(ChromaLightError):
    """An external estimator or balancer process failed or produced unusable output."""

    def __init__(self, message: str, stderr: str = "", returncode: Optional[int] = None):
        super().__init__(message)
        self.stderr = stderr
        self.returncode = returncode


class ManifestValidationError(ChromaLightError):
    """A dataset manifest violates the schema; every violation is listed in ``issues``."""

    def __init__(self, issues: list):
        self.issues = list(issues)
        lines = [f"{i.code.value}: scene={i.scene_id or '-'}: {i.detail}" for i in self.issues]
        super().__init__(f"{len(self.issues)} manifest issue(s):\n" + "\n".join(lines))


class TransportCacheError(ChromaLightError):
    """A transport cache file is malformed or belongs to another scene configuration."""


class EmptyRecordsError(ChromaLightError):
    """There is nothing to aggregate."""
