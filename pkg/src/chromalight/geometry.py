"""Equirectangular conventions, per-pixel solid angles and perspective crops.

Samples sit at pixel centers: polar angle theta = pi * (row + 0.5) / H measured
from +Z, azimuth phi = 2 * pi * (col + 0.5) / W measured from +X toward +Y.
"""

import math
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from chromalight.errors import InvalidInputError
from chromalight.raster import Panorama, RasterImage

Interpolation = Literal["bilinear", "nearest"]

DEFAULT_CROP_FOV = math.radians(90.0)
DEFAULT_CROP_SIZE = 256
DEFAULT_CROP_COUNT = 3


def _check_dims(width: int, height: int) -> None:
    if width < 2 or height < 1:
        raise InvalidInputError(f"equirectangular layout needs W >= 2 and H >= 1, got {width}x{height}")


def row_theta(height: int) -> NDArray[np.float64]:
    return np.pi * (np.arange(height) + 0.5) / height


def col_phi(width: int) -> NDArray[np.float64]:
    return 2.0 * np.pi * (np.arange(width) + 0.5) / width


def pixel_direction(row: int, col: int, width: int, height: int) -> NDArray[np.float64]:
    """Unit direction of the center of pixel (row, col)."""
    _check_dims(width, height)
    if not (0 <= row < height and 0 <= col < width):
        raise InvalidInputError(f"pixel ({row}, {col}) outside a {width}x{height} panorama")
    theta = math.pi * (row + 0.5) / height
    phi = 2.0 * math.pi * (col + 0.5) / width
    return np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])


def direction_grid(width: int, height: int) -> NDArray[np.float64]:
    """H x W x 3 array of pixel-center directions."""
    _check_dims(width, height)
    theta = row_theta(height)[:, None]
    phi = col_phi(width)[None, :]
    st = np.sin(theta)
    return np.stack(np.broadcast_arrays(st * np.cos(phi), st * np.sin(phi), np.cos(theta)), axis=-1)


def solid_angle_map(width: int, height: int) -> NDArray[np.float64]:
    """Per-row solid angle (steradians) of one pixel; broadcast it across columns."""
    _check_dims(width, height)
    return (2.0 * np.pi / width) * (np.pi / height) * np.sin(row_theta(height))


def solid_angle_grid(width: int, height: int) -> NDArray[np.float64]:
    return np.broadcast_to(solid_angle_map(width, height)[:, None], (height, width))


def direction_to_pixel(dirs: NDArray[np.float64], width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Continuous (row, col) coordinates, pixel centers at integers."""
    d = dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)
    theta = np.arccos(np.clip(d[..., 2], -1.0, 1.0))
    phi = np.mod(np.arctan2(d[..., 1], d[..., 0]), 2.0 * np.pi)
    return theta / np.pi * height - 0.5, phi / (2.0 * np.pi) * width - 0.5


def sample_panorama(p: RasterImage, rows: np.ndarray, cols: np.ndarray, interpolation: Interpolation = "bilinear") -> np.ndarray:
    """Sample at continuous coordinates: columns wrap around, rows clamp at the poles."""
    px = p.pixels
    h, w = px.shape[:2]
    if interpolation == "nearest":
        r = np.clip(np.floor(rows + 0.5).astype(np.int64), 0, h - 1)
        c = np.mod(np.floor(cols + 0.5).astype(np.int64), w)
        return px[r, c]
    if interpolation != "bilinear":
        raise InvalidInputError(f"unknown interpolation {interpolation!r}")
    r0 = np.floor(rows)
    c0 = np.floor(cols)
    fr = (rows - r0)[..., None]
    fc = (cols - c0)[..., None]
    r0 = r0.astype(np.int64)
    c0 = c0.astype(np.int64)
    ra = np.clip(r0, 0, h - 1)
    rb = np.clip(r0 + 1, 0, h - 1)
    ca = np.mod(c0, w)
    cb = np.mod(c0 + 1, w)
    top = px[ra, ca] * (1.0 - fc) + px[ra, cb] * fc
    bottom = px[rb, ca] * (1.0 - fc) + px[rb, cb] * fc
    return top * (1.0 - fr) + bottom * fr


def crop_azimuths(count: int = DEFAULT_CROP_COUNT) -> list[float]:
    """Evenly spaced azimuths in radians starting at 0 (3 crops: 0, 120, 240 degrees)."""
    if count < 1:
        raise InvalidInputError("at least one crop is required")
    return [2.0 * math.pi * k / count for k in range(count)]


def crop_rays(azimuth: float, fov: float, size: int) -> NDArray[np.float64]:
    """size x size x 3 pinhole rays; optical axis on the equator, up-vector +Z."""
    if not 0.0 < fov < math.pi:
        raise InvalidInputError(f"field of view must lie in (0, pi), got {fov}")
    if size < 2:
        raise InvalidInputError(f"crop size must be >= 2, got {size}")
    forward = np.array([math.cos(azimuth), math.sin(azimuth), 0.0])
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, up)
    half = math.tan(fov / 2.0)
    t = (2.0 * (np.arange(size) + 0.5) / size - 1.0) * half
    u = t[None, :, None]
    v = -t[:, None, None]
    return forward + u * right + v * up


def extract_crop(
    p: Panorama,
    azimuth: float,
    fov: float = DEFAULT_CROP_FOV,
    size: int = DEFAULT_CROP_SIZE,
    interpolation: Interpolation = "bilinear",
) -> RasterImage:
    """Square perspective view of a panorama, with the panorama's encoding."""
    rows, cols = direction_to_pixel(crop_rays(azimuth, fov, size), p.width, p.height)
    out = np.maximum(sample_panorama(p, rows, cols, interpolation), 0.0)
    return RasterImage(out, p.encoding)


def _interval_overlap(lo_out, hi_out, lo_in, hi_in) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    lo = np.maximum(lo_out[:, None], lo_in[None, :])
    hi = np.minimum(hi_out[:, None], hi_in[None, :])
    return lo, hi, hi > lo


def resample_panorama(p: Panorama, width: int, height: int) -> Panorama:
    """Area-weighted resampling to width x height.

    Each output pixel averages the input pixels it overlaps, weighted by the
    overlapping solid angle, so the solid-angle integral of every channel is
    preserved.
    """
    _check_dims(width, height)
    if (p.width, p.height) == (width, height):
        return p
    # rows: weights are integrals of sin(theta) over the overlapping polar interval
    edges_in = np.linspace(0.0, np.pi, p.height + 1)
    edges_out = np.linspace(0.0, np.pi, height + 1)
    lo, hi, hit = _interval_overlap(edges_out[:-1], edges_out[1:], edges_in[:-1], edges_in[1:])
    row_w = np.where(hit, np.cos(lo) - np.cos(hi), 0.0)
    row_w /= row_w.sum(axis=1, keepdims=True)
    # columns: weights are overlapping azimuth lengths
    edges_in = np.linspace(0.0, 1.0, p.width + 1)
    edges_out = np.linspace(0.0, 1.0, width + 1)
    lo, hi, hit = _interval_overlap(edges_out[:-1], edges_out[1:], edges_in[:-1], edges_in[1:])
    col_w = np.where(hit, hi - lo, 0.0)
    col_w /= col_w.sum(axis=1, keepdims=True)
    out = np.einsum("cj,rjk->rck", col_w, np.einsum("ri,ijk->rjk", row_w, p.pixels))
    return Panorama(np.maximum(out, 0.0), p.encoding)


def weighted_mean(p: Panorama) -> NDArray[np.float64]:
    """Solid-angle weighted mean color of a panorama."""
    w = solid_angle_grid(p.width, p.height)
    return np.einsum("hw,hwc->c", w, p.pixels) / w.sum()

