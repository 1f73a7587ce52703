"""HDR/LDR raster files and the tonemapping conventions shared by crops and targets.

PFM is the canonical HDR format (bit-exact round trips); EXR is read when the
optional OpenEXR codec is installed; LDR rasters are 8-bit PNG (JPEG accepted
read-only).
"""

import re
from enum import Enum
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from chromalight.errors import (
    ImageFormatError,
    PFMEndiannessError,
    PFMHeaderError,
    PFMTruncatedError,
    UnsupportedBitDepthError,
    ZeroMedianError,
)
from chromalight.raster import Encoding, ImageLike, Panorama, RasterImage, like, pixels_of

PathLike = Union[str, Path]

DEFAULT_TARGET_MEDIAN = 0.45
DEFAULT_GAMMA = 2.2

# BT.709 luminance weights
LUMINANCE_WEIGHTS = np.array([0.2126, 0.7152, 0.0722])

HDR_SUFFIXES = {".pfm", ".exr"}
LDR_SUFFIXES = {".png", ".jpg", ".jpeg"}


class MedianMode(str, Enum):
    """Per-pixel intensity whose median drives the tonemapping exposure."""
    CHANNEL_MEAN = "channel_mean"
    LUMINANCE = "luminance"


# PFM

_PFM_HEADER = re.compile(rb"\A(PF|Pf)\s+(\d+)\s+(\d+)\s+(\S+)\s")


def read_pfm(path: PathLike) -> RasterImage:
    """Read a color PFM ("PF") written little-endian (negative scale)."""
    data = Path(path).read_bytes()
    match = _PFM_HEADER.match(data)
    if match is None:
        raise PFMHeaderError(f"{path}: malformed PFM header")
    kind, width, height, scale_token = match.groups()
    if kind != b"PF":
        raise PFMHeaderError(f"{path}: only 3-channel 'PF' files are supported, got {kind.decode()!r}")
    try:
        scale = float(scale_token)
    except ValueError:
        raise PFMHeaderError(f"{path}: malformed PFM scale {scale_token!r}")
    if scale == 0.0:
        raise PFMHeaderError(f"{path}: PFM scale must be non-zero")
    if scale > 0.0:
        raise PFMEndiannessError(f"{path}: big-endian PFM (scale {scale}) is not supported")
    width, height = int(width), int(height)
    if width < 1 or height < 1:
        raise PFMHeaderError(f"{path}: invalid dimensions {width}x{height}")
    offset = match.end()
    expected = width * height * 3 * 4
    payload = data[offset:offset + expected]
    if len(payload) < expected:
        raise PFMTruncatedError(f"{path}: expected {expected} payload bytes, found {len(payload)}")
    pixels = np.frombuffer(payload, dtype="<f4").reshape(height, width, 3)
    # PFM stores the bottom row first
    return RasterImage(np.flipud(pixels).astype(np.float64), Encoding.HDR)


def write_pfm(path: PathLike, img: RasterImage) -> None:
    if img.encoding is not Encoding.HDR:
        raise ImageFormatError("PFM holds linear radiance; refusing to write an LDR-tagged image")
    header = b"PF\n%d %d\n-1.0\n" % (img.width, img.height)
    payload = np.flipud(img.pixels).astype("<f4").tobytes()
    Path(path).write_bytes(header + payload)


# EXR (optional codec)

def read_exr(path: PathLike) -> RasterImage:
    try:
        import Imath
        import OpenEXR
    except ImportError as e:
        raise ImageFormatError(f"{path}: reading EXR needs the optional 'exr' extra (OpenEXR): {e}")
    f = OpenEXR.InputFile(str(path))
    try:
        dw = f.header()["dataWindow"]
        size = (dw.max.y - dw.min.y + 1, dw.max.x - dw.min.x + 1)
        pixel_type = Imath.PixelType(Imath.PixelType.FLOAT)
        channels = [np.frombuffer(f.channel(c, pixel_type), dtype=np.float32).reshape(size) for c in "RGB"]
    finally:
        f.close()
    return RasterImage(np.maximum(np.dstack(channels).astype(np.float64), 0.0), Encoding.HDR)


# LDR

def read_ldr(path: PathLike) -> RasterImage:
    """Decode an 8-bit PNG (or a JPEG) to values v / 255."""
    with Image.open(path) as im:
        if im.mode in ("RGB", "L", "P"):
            arr = np.asarray(im.convert("RGB"))
        elif im.mode == "RGBA":
            arr = np.asarray(im.convert("RGBA"))[..., :3]
        else:
            raise UnsupportedBitDepthError(f"{path}: unsupported image mode {im.mode!r}; expected 8-bit RGB")
    if arr.dtype != np.uint8:
        raise UnsupportedBitDepthError(f"{path}: expected 8-bit samples, got {arr.dtype}")
    return RasterImage(arr.astype(np.float64) / 255.0, Encoding.LDR)


def quantize_ldr(img: ImageLike) -> np.ndarray:
    return np.clip(np.round(pixels_of(img) * 255.0), 0, 255).astype(np.uint8)


def write_ldr(path: PathLike, img: RasterImage) -> None:
    if Path(path).suffix.lower() != ".png":
        raise ImageFormatError(f"{path}: LDR output is written as PNG only")
    Image.fromarray(quantize_ldr(img)).save(path, format="PNG")


def read_image(path: PathLike) -> RasterImage:
    """Dispatch on the file suffix."""
    suffix = Path(path).suffix.lower()
    if suffix == ".pfm":
        return read_pfm(path)
    if suffix == ".exr":
        return read_exr(path)
    if suffix in LDR_SUFFIXES:
        return read_ldr(path)
    raise ImageFormatError(f"{path}: unknown raster suffix {suffix!r}")


def read_panorama(path: PathLike) -> Panorama:
    return Panorama.from_image(read_image(path))


# Tonemapping

def intensity(img: ImageLike, median_mode: MedianMode = MedianMode.CHANNEL_MEAN) -> np.ndarray:
    px = pixels_of(img)
    if MedianMode(median_mode) is MedianMode.LUMINANCE:
        return px @ LUMINANCE_WEIGHTS
    return px.mean(axis=-1)


def tonemap_ldr(
    hdr: RasterImage,
    target_median: float = DEFAULT_TARGET_MEDIAN,
    gamma: float = DEFAULT_GAMMA,
    median_mode: MedianMode = MedianMode.CHANNEL_MEAN,
) -> tuple[RasterImage, float]:
    """Re-expose so the median intensity equals target_median, clip to 1, apply 1/gamma.

    Returns the LDR image and the exposure factor, so the same factor can be
    applied to a target panorama.
    """
    median = float(np.median(intensity(hdr, median_mode)))
    if median <= 0.0:
        raise ZeroMedianError("median intensity is zero; no exposure maps it to the target")
    exposure = target_median / median
    ldr = np.clip(exposure * hdr.pixels, 0.0, 1.0) ** (1.0 / gamma)
    return RasterImage(ldr, Encoding.LDR), exposure


def inverse_tonemap(ldr: RasterImage, gamma: float = DEFAULT_GAMMA) -> RasterImage:
    """Per-channel x ** gamma; the result is tagged as linear radiance."""
    return RasterImage(ldr.pixels ** gamma, Encoding.HDR)


def linearize(img: RasterImage, gamma: float = DEFAULT_GAMMA) -> RasterImage:
    """Linear radiance view of an image: LDR input is inverse-tonemapped, HDR passes through."""
    if img.encoding is Encoding.LDR:
        return inverse_tonemap(img, gamma)
    return img


def encode_ldr(linear: RasterImage, gamma: float = DEFAULT_GAMMA) -> RasterImage:
    """Clip linear values to [0, 1] and apply 1/gamma, without re-exposing."""
    if linear.encoding is Encoding.LDR:
        return linear
    return RasterImage(np.clip(linear.pixels, 0.0, 1.0) ** (1.0 / gamma), Encoding.LDR)


def apply_exposure(img: ImageLike, exposure: float) -> ImageLike:
    return like(img, pixels_of(img) * exposure)
