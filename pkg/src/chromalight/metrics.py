"""Color-specific loss and evaluation metrics over rendered scenes and panoramas."""

import math
from typing import Optional

import numpy as np

from chromalight.color import chromaticity, delta_e, rgb_angular_error, rgb_array_to_lab
from chromalight.errors import DimensionMismatchError
from chromalight.geometry import solid_angle_grid
from chromalight.image_io import DEFAULT_GAMMA, DEFAULT_TARGET_MEDIAN, MedianMode, linearize, tonemap_ldr
from chromalight.models import MetricReport
from chromalight.raster import ImageLike, Panorama, RasterImage, pixels_of
from chromalight.transport import TransportMatrix, render


def angular_chroma_loss(L: Panorama, L_star: Panorama) -> float:
    """Solid-angle weighted mean of (1 - cos) between per-pixel chromaticities.

    (1 / 4pi) * sum_i (1 - cos(angle(c_i, c*_i))) * dw_i, where c is RGB over
    its component sum and black pixels count as neutral.
    """
    a, b = pixels_of(L), pixels_of(L_star)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"panorama shapes differ: {a.shape} vs {b.shape}")
    ca, cb = chromaticity(a), chromaticity(b)
    # chromaticities sum to one, so their norms never vanish
    cos = np.einsum("...c,...c->...", ca, cb) / (np.linalg.norm(ca, axis=-1) * np.linalg.norm(cb, axis=-1))
    d_omega = solid_angle_grid(a.shape[1], a.shape[0])
    return float(np.sum((1.0 - np.clip(cos, -1.0, 1.0)) * d_omega) / (4.0 * math.pi))


def exposed_lab(render_px: np.ndarray, exposure: float) -> np.ndarray:
    """Lab of a render after exposure and clipping to [0, 1]."""
    return rgb_array_to_lab(np.clip(exposure * render_px, 0.0, 1.0))


def evaluate_pair(
    t: TransportMatrix,
    L: Panorama,
    L_star: Panorama,
    target_median: float = DEFAULT_TARGET_MEDIAN,
    gamma: float = DEFAULT_GAMMA,
    median_mode: MedianMode = MedianMode.CHANNEL_MEAN,
    target_render: Optional[RasterImage] = None,
) -> MetricReport:
    """Render estimate and ground truth through ``t`` and compare them.

    Both renders share the exposure that tonemaps the ground-truth render, so
    delta E penalizes intensity errors as well as color errors.
    ``target_render`` is render(t, L_star) when the caller already has it.
    """
    r = render(t, L)
    r_star = render(t, L_star) if target_render is None else target_render
    _, exposure = tonemap_ldr(r_star, target_median, gamma, median_mode)
    de = delta_e(exposed_lab(r.pixels, exposure), exposed_lab(r_star.pixels, exposure))
    return MetricReport(
        delta_e=float(np.mean(de)),
        rgb_angular_deg=min(rgb_angular_error(r, r_star), 180.0),
        render_l1=float(np.mean(np.abs(r.pixels - r_star.pixels))),
        ang_loss=min(angular_chroma_loss(L, L_star), 2.0),
    )


def awb_angular_distance(img_s: ImageLike, img_awb: ImageLike) -> float:
    """Mean RGB angle in degrees between an image and the AWB rendition of the same view.

    LDR-tagged images are linearized first; black pixels are skipped.
    """
    if isinstance(img_s, RasterImage):
        img_s = linearize(img_s)
    if isinstance(img_awb, RasterImage):
        img_awb = linearize(img_awb)
    return rgb_angular_error(img_s, img_awb)
