"""Color-adaptation strategies as pipeline stages.

White balancing always happens on linear values: an LDR crop is inverse
tonemapped first, balanced, and re-encoded with the same gamma (no re-exposure)
before it reaches an estimator.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from chromalight.color import (
    ColorMatrix3,
    Illuminant,
    apply_color_matrix,
    as_color_matrix,
    color_fit_residual,
    fit_color_matrix,
    invert_color_matrix,
    rgb_adaptation_matrix,
    saturation_mask,
    unclipped_pixels,
)
from chromalight.errors import DegenerateFitError, DegenerateInputError, DimensionMismatchError
from chromalight.estimators import DEFAULT_TIMEOUT, LightingEstimator, run_external
from chromalight.image_io import encode_ldr, linearize
from chromalight.models import StrategyId, WhiteBalancer, WhiteBalancerKind
from chromalight.raster import Encoding, Panorama, RasterImage

logger = logging.getLogger(__name__)

# "no change" plus the eleven CIE illuminants, drawn uniformly
AUGMENT_CHOICES: tuple[Optional[Illuminant], ...] = (None, *Illuminant)


def _gains(levels: np.ndarray, target: float) -> np.ndarray:
    if np.any(levels <= 0.0):
        raise DegenerateInputError(f"a color channel carries no signal (levels {levels.tolist()})")
    return target / levels


def balance_gains(px: np.ndarray, wb: WhiteBalancer) -> np.ndarray:
    """Per-channel gains of the statistical balancers."""
    flat = px.reshape(-1, 3)
    if wb.kind is WhiteBalancerKind.GRAY_WORLD:
        levels = flat.mean(axis=0)
    elif wb.kind is WhiteBalancerKind.SHADES_OF_GRAY:
        levels = np.mean(flat ** wb.p, axis=0) ** (1.0 / wb.p)
    elif wb.kind is WhiteBalancerKind.WHITE_PATCH:
        levels = np.percentile(flat, wb.percentile, axis=0)
    else:
        raise ValueError(f"{wb.kind.value} is not a per-channel gain balancer")
    return _gains(levels, float(levels.mean()))


def white_balance(
    I: RasterImage,
    wb: WhiteBalancer,
    timeout: float = DEFAULT_TIMEOUT,
) -> RasterImage:
    """Neutral-looking linear version of ``I``; the result is tagged HDR."""
    lin = linearize(I)
    if wb.kind is WhiteBalancerKind.IDENTITY:
        return lin
    if wb.kind is WhiteBalancerKind.FIXED_MATRIX:
        return apply_color_matrix(lin, wb.matrix)
    if wb.kind is WhiteBalancerKind.EXTERNAL:
        out = linearize(run_external(wb.command, I, timeout))
        if (out.width, out.height) != (I.width, I.height):
            raise DimensionMismatchError(
                f"external balancer returned {out.width}x{out.height} for a {I.width}x{I.height} input"
            )
        return out
    if not np.any(lin.pixels > 0.0):
        raise DegenerateInputError("cannot white-balance an all-black image")
    # clipped pixels of an LDR input carry no usable channel ratio
    gains = balance_gains(unclipped_pixels(I, lin), wb)
    return lin.with_pixels(np.maximum(lin.pixels * gains, 0.0))


@dataclass(frozen=True)
class BalanceFit:
    """A balanced crop and the linear map T taking it back to the original colors."""
    balanced: RasterImage
    balanced_linear: RasterImage
    matrix: ColorMatrix3
    residual: float


def fit_balance(I: RasterImage, wb: WhiteBalancer, diagonal: bool = False, timeout: float = DEFAULT_TIMEOUT) -> BalanceFit:
    """Balance ``I`` and fit T with T @ balanced ~= original over unclipped pixels, in linear RGB."""
    lin = linearize(I)
    lin_wb = white_balance(I, wb, timeout)
    mask = saturation_mask(I) if I.encoding is Encoding.LDR else None
    m = fit_color_matrix(lin_wb, lin, mask=mask, diagonal=diagonal)
    residual = color_fit_residual(lin_wb, lin, m, mask=mask)
    balanced = lin_wb
    if mask is not None:
        # pixels clipped in the input stay saturated in the balanced crop
        balanced = encode_ldr(lin_wb)
        balanced = balanced.with_pixels(np.where(mask[..., None], balanced.pixels, 1.0))
    return BalanceFit(balanced, lin_wb, m, residual)


@dataclass(frozen=True)
class StrategyOutcome:
    panorama: Panorama
    matrix: Optional[ColorMatrix3] = None
    residual: Optional[float] = None
    fallback: bool = False


def wb_test(
    I: RasterImage,
    wb: WhiteBalancer,
    est: LightingEstimator,
    diagonal: bool = False,
    timeout: float = DEFAULT_TIMEOUT,
) -> StrategyOutcome:
    """Balance the input, estimate, then map the estimate back with the fitted matrix.

    A rank-deficient fit (or an input the balancer cannot handle) falls back to
    the unwrapped estimate and sets ``fallback``.
    """
    if wb.kind is WhiteBalancerKind.IDENTITY:
        return StrategyOutcome(est.estimate(I), np.eye(3), 0.0)
    try:
        fit = fit_balance(I, wb, diagonal, timeout)
    except (DegenerateFitError, DegenerateInputError) as e:
        logger.warning("white-balance wrap skipped, using the unwrapped estimate: %s", e)
        return StrategyOutcome(est.estimate(I), fallback=True)
    logger.debug("fitted color matrix %s (residual %.3g)", np.array2string(fit.matrix, precision=4), fit.residual)
    L_prime = est.estimate(fit.balanced)
    return StrategyOutcome(apply_color_matrix(L_prime, fit.matrix), fit.matrix, fit.residual)


def wb_test_pipeline(I: RasterImage, wb: WhiteBalancer, est: LightingEstimator, diagonal: bool = False) -> Panorama:
    return wb_test(I, wb, est, diagonal).panorama


def wb_train_prepare(
    I: RasterImage,
    L_star: Panorama,
    wb: WhiteBalancer,
    diagonal: bool = False,
) -> tuple[RasterImage, Panorama]:
    """Training pair for an estimator that only ever sees balanced inputs: (balanced crop, T^-1 applied to L*)."""
    if wb.kind is WhiteBalancerKind.IDENTITY:
        return I, L_star
    fit = fit_balance(I, wb, diagonal)
    return fit.balanced, apply_color_matrix(L_star, invert_color_matrix(fit.matrix))


def draw_augmentation(rng: np.random.Generator) -> Optional[Illuminant]:
    return AUGMENT_CHOICES[int(rng.integers(len(AUGMENT_CHOICES)))]


def adapt_panorama(L: Panorama, dst: Illuminant, source: Illuminant = Illuminant.D65) -> Panorama:
    """Re-light ``L`` as if under ``dst`` (Bradford, via XYZ), clamped at zero."""
    return apply_color_matrix(L, rgb_adaptation_matrix(source, dst))


def augment_illuminant(
    L_star: Panorama,
    rng_seed: Union[int, np.random.Generator, None],
    source: Illuminant = Illuminant.D65,
) -> tuple[Panorama, Optional[Illuminant]]:
    """Chromatic augmentation of a target panorama.

    One of the twelve options is drawn uniformly; None means "no change" and
    returns the input as is. The scene is assumed balanced for ``source``.
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    choice = draw_augmentation(rng)
    if choice is None:
        return L_star, None
    return adapt_panorama(L_star, choice, source), choice


def run_strategy(
    strategy: StrategyId,
    crop: RasterImage,
    wb: WhiteBalancer,
    est: LightingEstimator,
    diagonal: bool = False,
    timeout: float = DEFAULT_TIMEOUT,
) -> StrategyOutcome:
    """Inference path of one strategy.

    AngLoss and Augment change only how the estimator was trained, so at
    inference they call it directly, like Baseline. WbTest and WbTrain both wrap
    the estimator in the white-balance pipeline.
    """
    strategy = StrategyId(strategy)
    if strategy.wraps_white_balance:
        return wb_test(crop, wb, est, diagonal, timeout)
    return StrategyOutcome(est.estimate(crop))


def fixed_matrix_balancer(m) -> WhiteBalancer:
    return WhiteBalancer(kind=WhiteBalancerKind.FIXED_MATRIX, matrix=as_color_matrix(m).reshape(-1).tolist())
