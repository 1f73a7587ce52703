"""Pixel containers: RasterImage and the equirectangular Panorama."""

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from chromalight.errors import InvalidInputError


class Encoding(str, Enum):
    """How the values of a raster are to be read."""
    HDR = "hdr"
    LDR = "ldr"

    @property
    def description(self) -> str:
        return {
            "hdr": "linear radiance, non-negative and unbounded",
            "ldr": "display-encoded values in [0, 1]",
        }[self.value]


@dataclass(frozen=True, eq=False)
class RasterImage:
    """H x W x 3 float64 pixels, row-major, tagged with an encoding.

    The pixel buffer is copied on construction and made read-only, so a
    RasterImage can be shared between threads without further care.
    """
    pixels: np.ndarray
    encoding: Encoding = Encoding.HDR

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3:
            raise InvalidInputError(f"expected an H x W x 3 array, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise InvalidInputError(f"empty raster {px.shape}")
        if not np.all(np.isfinite(px)):
            raise InvalidInputError("pixel values must be finite")
        if px.min() < 0.0:
            raise InvalidInputError("pixel values must be non-negative")
        encoding = Encoding(self.encoding)
        if encoding is Encoding.LDR and px.max() > 1.0:
            raise InvalidInputError("LDR pixel values must lie in [0, 1]")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "encoding", encoding)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def size(self) -> tuple[int, int]:
        """(width, height)"""
        return self.width, self.height

    def with_pixels(self, pixels: np.ndarray, encoding: Optional[Encoding] = None):
        """Same class and encoding (unless overridden), new pixel values."""
        return replace(self, pixels=pixels, encoding=encoding or self.encoding)

    @classmethod
    def uniform(cls, width: int, height: int, rgb: Sequence[float], encoding: Encoding = Encoding.HDR):
        pixels = np.broadcast_to(np.asarray(rgb, dtype=np.float64), (height, width, 3))
        return cls(pixels, encoding)


@dataclass(frozen=True, eq=False)
class Panorama(RasterImage):
    """Equirectangular environment map.

    Row 0 is the zenith (+Z up) and row H-1 the nadir; column 0 is azimuth 0
    with azimuth increasing eastward (from +X toward +Y) over [0, 2*pi).
    """

    def __post_init__(self):
        super().__post_init__()
        if self.width < 2:
            raise InvalidInputError(f"a panorama needs W >= 2, got W={self.width}")

    @classmethod
    def from_image(cls, img: RasterImage) -> "Panorama":
        if isinstance(img, Panorama):
            return img
        return cls(img.pixels, img.encoding)


ImageLike = Union[RasterImage, np.ndarray]


def pixels_of(img: ImageLike) -> np.ndarray:
    """Float64 pixel array of a RasterImage or of any array-like."""
    if isinstance(img, RasterImage):
        return img.pixels
    return np.asarray(img, dtype=np.float64)


def like(template: ImageLike, pixels: np.ndarray) -> ImageLike:
    """Wrap ``pixels`` the way ``template`` is wrapped."""
    if isinstance(template, RasterImage):
        return template.with_pixels(pixels)
    return pixels
