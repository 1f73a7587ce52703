"""Color spaces, color differences, standard illuminants and linear color transforms.

All RGB data is linear sRGB/BT.709 with a D65 reference white. Functions accept
either RasterImage objects or plain ``(..., 3)`` arrays.
"""

import logging
from enum import Enum
from typing import NamedTuple, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from chromalight.errors import (
    DegenerateFitError,
    DimensionMismatchError,
    InvalidInputError,
    UndefinedMetricError,
)
from chromalight.raster import Encoding, ImageLike, RasterImage, like, pixels_of

logger = logging.getLogger(__name__)

ColorMatrix3 = NDArray[np.float64]

NEUTRAL_CHROMATICITY = np.full(3, 1.0 / 3.0)
ZERO_NORM = 1e-12
SATURATION_THRESHOLD = 0.99

# Sharpened cone response of the Bradford transform.
BRADFORD = np.array([
    [0.8951, 0.2664, -0.1614],
    [-0.7502, 1.7135, 0.0367],
    [0.0389, -0.0685, 1.0296],
])

# BT.709 / sRGB primaries, CIE 1931 xy.
BT709_PRIMARIES_XY = ((0.64, 0.33), (0.30, 0.60), (0.15, 0.06))


class Illuminant(str, Enum):
    """CIE standard illuminants used for chromatic augmentation and synthetic tints."""
    A = "A"
    B = "B"
    C = "C"
    D50 = "D50"
    D55 = "D55"
    D65 = "D65"
    D75 = "D75"
    E = "E"
    F2 = "F2"
    F7 = "F7"
    F11 = "F11"

    @classmethod
    def get_white_xy(cls, name: str) -> tuple[float, float]:
        """CIE 1931 2-degree chromaticity of an illuminant's white point."""
        table = {
            "A": (0.44757, 0.40745),
            "B": (0.34842, 0.35161),
            "C": (0.31006, 0.31616),
            "D50": (0.34567, 0.35850),
            "D55": (0.33242, 0.34743),
            "D65": (0.31271, 0.32902),
            "D75": (0.29902, 0.31485),
            "E": (1.0 / 3.0, 1.0 / 3.0),
            "F2": (0.37208, 0.37529),
            "F7": (0.31292, 0.32933),
            "F11": (0.38052, 0.37713),
        }
        return table[name]

    @property
    def white_xy(self) -> tuple[float, float]:
        return self.get_white_xy(self.value)

    @property
    def white_xyz(self) -> NDArray[np.float64]:
        """White point in XYZ, normalized so that Y = 1."""
        return xy_to_xyz(self.white_xy)


class LabColor(NamedTuple):
    L: float
    a: float
    b: float


def xy_to_xyz(xy: Sequence[float]) -> NDArray[np.float64]:
    x, y = float(xy[0]), float(xy[1])
    if x <= 0 or y <= 0 or x + y >= 1:
        raise InvalidInputError(f"invalid chromaticity ({x}, {y})")
    return np.array([x / y, 1.0, (1.0 - x - y) / y])


def rgb_to_xyz_matrix() -> ColorMatrix3:
    """Linear BT.709 RGB to XYZ, scaled so RGB (1, 1, 1) maps to the D65 white."""
    primaries = np.stack([xy_to_xyz(xy) for xy in BT709_PRIMARIES_XY], axis=1)
    scale = np.linalg.solve(primaries, Illuminant.D65.white_xyz)
    return primaries * scale


RGB_TO_XYZ = rgb_to_xyz_matrix()
XYZ_TO_RGB = np.linalg.inv(RGB_TO_XYZ)


def as_color_matrix(m: ArrayLike) -> ColorMatrix3:
    """Validate a 3x3 matrix (9 finite entries, row-major)."""
    out = np.asarray(m, dtype=np.float64)
    if out.size == 9:
        out = out.reshape(3, 3)
    if out.shape != (3, 3):
        raise InvalidInputError(f"a color matrix has 9 entries, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise InvalidInputError("color matrix entries must be finite")
    return out


def invert_color_matrix(m: ArrayLike) -> ColorMatrix3:
    m = as_color_matrix(m)
    det = np.linalg.det(m)
    if abs(det) <= 1e-12:
        raise DegenerateFitError(f"color matrix is not invertible (det={det:.3e})", rank=int(np.linalg.matrix_rank(m)))
    return np.linalg.inv(m)


def _check_non_negative(px: np.ndarray) -> None:
    if np.any(px < 0):
        raise InvalidInputError("RGB components must be non-negative")


def chromaticity(rgb: ArrayLike) -> NDArray[np.float64]:
    """RGB divided by its component sum; the zero vector maps to (1/3, 1/3, 1/3)."""
    px = np.asarray(rgb, dtype=np.float64)
    if px.shape[-1] != 3:
        raise InvalidInputError(f"expected RGB triples, got shape {px.shape}")
    _check_non_negative(px)
    total = px.sum(axis=-1, keepdims=True)
    zero = total <= 0.0
    out = np.divide(px, total, out=np.zeros_like(px), where=~zero)
    return np.where(zero, NEUTRAL_CHROMATICITY, out)


def pixel_angles(a: np.ndarray, b: np.ndarray) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    """Per-pixel angle in degrees between two RGB arrays, and the validity mask.

    Pixels where either vector has a norm below 1e-12 are invalid.
    """
    na = np.linalg.norm(a, axis=-1)
    nb = np.linalg.norm(b, axis=-1)
    valid = (na >= ZERO_NORM) & (nb >= ZERO_NORM)
    # atan2 keeps identical and scaled vectors at exactly zero
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    dot = np.einsum("...c,...c->...", a, b)
    return np.degrees(np.arctan2(cross, dot)), valid


def rgb_angular_error(a: ImageLike, b: ImageLike) -> float:
    """Mean angle in degrees between corresponding RGB pixels of two images."""
    pa, pb = pixels_of(a), pixels_of(b)
    if pa.shape != pb.shape:
        raise DimensionMismatchError(f"image shapes differ: {pa.shape} vs {pb.shape}")
    _check_non_negative(pa)
    _check_non_negative(pb)
    angles, valid = pixel_angles(pa, pb)
    if not np.any(valid):
        raise UndefinedMetricError("every pixel has a zero RGB vector; the angular error is undefined")
    return float(np.mean(angles[valid]))


def _lab_f(t: np.ndarray) -> np.ndarray:
    delta = 6.0 / 29.0
    return np.where(t > delta ** 3, np.cbrt(t), t / (3.0 * delta ** 2) + 4.0 / 29.0)


def rgb_array_to_lab(rgb: ArrayLike, white: Illuminant = Illuminant.D65) -> NDArray[np.float64]:
    """Vectorized linear RGB to CIELAB over the last axis."""
    px = np.asarray(rgb, dtype=np.float64)
    _check_non_negative(px)
    xyz = px @ RGB_TO_XYZ.T
    f = _lab_f(xyz / Illuminant(white).white_xyz)
    L = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return np.stack([L, a, b], axis=-1)


def rgb_to_lab(rgb: Sequence[float], white: Illuminant = Illuminant.D65) -> LabColor:
    lab = rgb_array_to_lab(np.asarray(rgb, dtype=np.float64).reshape(3), white)
    return LabColor(*(float(v) for v in lab))


def delta_e(a: ArrayLike, b: ArrayLike):
    """CIE76 color difference: Euclidean distance in Lab over the last axis."""
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    out = np.sqrt(np.sum(diff * diff, axis=-1))
    return float(out) if np.ndim(out) == 0 else out


def bradford_adaptation(src: Illuminant, dst: Illuminant) -> ColorMatrix3:
    """XYZ-space von Kries adaptation in the Bradford cone space, mapping src white to dst white."""
    src, dst = Illuminant(src), Illuminant(dst)
    if src is dst:
        return np.eye(3)
    rho_src = BRADFORD @ src.white_xyz
    rho_dst = BRADFORD @ dst.white_xyz
    return np.linalg.solve(BRADFORD, np.diag(rho_dst / rho_src) @ BRADFORD)


def rgb_adaptation_matrix(src: Illuminant, dst: Illuminant) -> ColorMatrix3:
    """Bradford adaptation expressed on linear RGB."""
    return XYZ_TO_RGB @ bradford_adaptation(src, dst) @ RGB_TO_XYZ


def saturation_mask(img: ImageLike, threshold: float = SATURATION_THRESHOLD) -> NDArray[np.bool_]:
    """True where no channel reaches the clipping threshold."""
    return np.all(pixels_of(img) < threshold, axis=-1)


def unclipped_pixels(img: ImageLike, values: Optional[ImageLike] = None) -> NDArray[np.float64]:
    """N x 3 pixels of ``values`` (default ``img``) where ``img`` is not clipped.

    Only LDR images clip. HDR inputs, and LDR inputs clipped everywhere,
    give back every pixel.
    """
    flat = pixels_of(img if values is None else values).reshape(-1, 3)
    if isinstance(img, RasterImage) and img.encoding is Encoding.LDR:
        mask = saturation_mask(img).reshape(-1)
        if mask.any():
            return flat[mask]
    return flat


def _default_mask(src: ImageLike, dst: ImageLike) -> Optional[np.ndarray]:
    ldr = [x for x in (src, dst) if isinstance(x, RasterImage) and x.encoding is Encoding.LDR]
    if not ldr:
        return None
    mask = saturation_mask(ldr[0])
    for x in ldr[1:]:
        mask &= saturation_mask(x)
    return mask


def _valid_pairs(src: ImageLike, dst: ImageLike, mask: Optional[ArrayLike]) -> tuple[np.ndarray, np.ndarray]:
    ps, pd = pixels_of(src), pixels_of(dst)
    if ps.shape != pd.shape:
        raise DimensionMismatchError(f"image shapes differ: {ps.shape} vs {pd.shape}")
    if mask is None:
        mask = _default_mask(src, dst)
    x = ps.reshape(-1, 3)
    y = pd.reshape(-1, 3)
    if mask is not None:
        keep = np.asarray(mask, dtype=bool).reshape(-1)
        if keep.size != x.shape[0]:
            raise DimensionMismatchError(f"mask has {keep.size} entries for {x.shape[0]} pixels")
        x, y = x[keep], y[keep]
    return x, y


def fit_color_matrix(
    src: ImageLike,
    dst: ImageLike,
    mask: Optional[ArrayLike] = None,
    diagonal: bool = False,
) -> ColorMatrix3:
    """Least-squares M with M @ src_i ~= dst_i over valid pixels.

    The default mask drops clipped pixels (any channel >= 0.99) of LDR-tagged
    inputs and keeps everything otherwise. ``diagonal=True`` restricts M to
    per-channel gains.
    """
    x, y = _valid_pairs(src, dst, mask)
    if diagonal:
        energy = np.sum(x * x, axis=0)
        rank = int(np.count_nonzero(energy > 0))
        if rank < 3:
            raise DegenerateFitError(f"diagonal fit needs energy in every channel (rank {rank})", rank=rank)
        return np.diag(np.sum(x * y, axis=0) / energy)
    rank = int(np.linalg.matrix_rank(x)) if x.shape[0] else 0
    if rank < 3:
        raise DegenerateFitError(
            f"valid source pixels span rank {rank} over {x.shape[0]} pixels; a 3x3 fit needs rank 3",
            rank=rank,
        )
    # normal equations: (X^T X) M^T = X^T Y
    mt = np.linalg.solve(x.T @ x, x.T @ y)
    return as_color_matrix(mt.T)


def color_fit_residual(
    src: ImageLike,
    dst: ImageLike,
    m: ArrayLike,
    mask: Optional[ArrayLike] = None,
) -> float:
    """RMS residual of the unclamped product M @ src - dst over valid pixels."""
    x, y = _valid_pairs(src, dst, mask)
    if x.shape[0] == 0:
        return 0.0
    r = x @ as_color_matrix(m).T - y
    return float(np.sqrt(np.mean(np.sum(r * r, axis=-1))))


def apply_color_matrix(img: ImageLike, m: ArrayLike) -> ImageLike:
    """Per-pixel M @ rgb, negative results clamped to zero (and LDR results to one)."""
    px = pixels_of(img)
    out = np.maximum(px @ as_color_matrix(m).T, 0.0)
    if isinstance(img, RasterImage) and img.encoding is Encoding.LDR:
        out = np.minimum(out, 1.0)
    return like(img, out)
