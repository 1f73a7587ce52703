"""The lighting-estimator boundary.

Built-in analytic estimators exist for testing the evaluation stack; real
models are attached through a process protocol. An external command is called
once per crop with an 8-bit PNG input and must write a little-endian PFM
equirectangular panorama:

    CMD --input <crop.png> --output <panorama.pfm>

If the command template contains ``{input}`` and ``{output}`` placeholders they
are substituted instead of appending the two options. Exit code 0 means success.
"""

import logging
import os
import shlex
import subprocess
import tempfile
from pathlib import Path
from typing import NamedTuple, Optional, Protocol, runtime_checkable

import numpy as np

from chromalight.color import apply_color_matrix, chromaticity, fit_color_matrix, saturation_mask, unclipped_pixels
from chromalight.errors import (
    ChromaLightError,
    DimensionMismatchError,
    EstimatorFailureError,
    InvalidInputError,
)
from chromalight.image_io import encode_ldr, linearize, read_pfm, write_ldr
from chromalight.models import EstimatorKind, EstimatorSpec
from chromalight.raster import Encoding, Panorama, RasterImage

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 600.0
STDERR_TAIL = 2000


@runtime_checkable
class LightingEstimator(Protocol):
    """Anything that maps one LDR crop to an HDR equirectangular panorama."""

    @property
    def deterministic(self) -> bool:
        ...

    def estimate(self, crop: RasterImage) -> Panorama:
        ...


class EquivariantReference(NamedTuple):
    """A neutral crop and the panorama it was taken from."""
    crop: RasterImage
    panorama: Panorama


def _channel_means(crop: RasterImage) -> np.ndarray:
    return linearize(crop).pixels.reshape(-1, 3).mean(axis=0)


class OracleEstimator:
    """Returns the registered ground truth, whatever the input."""
    deterministic = True

    def __init__(self, ground_truth: Panorama):
        self.ground_truth = ground_truth

    def estimate(self, crop: RasterImage) -> Panorama:
        return self.ground_truth


class EquivariantOracle:
    """Maps the reference panorama by the linear color change from the reference crop to the input.

    For inputs that are a global 3x3 transform M of the reference crop the
    output is M applied to the reference panorama.
    """
    deterministic = True

    def __init__(self, reference: EquivariantReference):
        self.reference = reference

    def estimate(self, crop: RasterImage) -> Panorama:
        ref = self.reference.crop
        if (crop.width, crop.height) != (ref.width, ref.height):
            raise DimensionMismatchError(
                f"input crop is {crop.width}x{crop.height}, reference is {ref.width}x{ref.height}"
            )
        mask = np.ones((crop.height, crop.width), dtype=bool)
        for img in (crop, ref):
            if img.encoding is Encoding.LDR:
                mask &= saturation_mask(img)
        m = fit_color_matrix(linearize(ref), linearize(crop), mask=mask)
        return apply_color_matrix(self.reference.panorama, m)


class ConstantAmbientEstimator:
    """Uniform panorama at the mean linear color of the crop."""
    deterministic = True

    def __init__(self, width: int = 128, height: int = 64):
        self.width = width
        self.height = height

    def estimate(self, crop: RasterImage) -> Panorama:
        return Panorama.uniform(self.width, self.height, _channel_means(crop))


def tint_blind_estimate(crop: RasterImage, beta: float, width: int = 128, height: int = 64) -> Panorama:
    """Constant-ambient estimate of the gray-world balanced crop, re-tinted with an overshoot.

    Statistics cover the unclipped pixels of an LDR crop (every pixel when
    none are left); clipped lights would otherwise dominate them. The
    neutral level is the joint mean of the channel means (where gray-world
    balancing puts every channel); it is then multiplied per channel by
    (c / (1/3)) ** (1 + beta). c is the chromaticity of the mean linear
    color, i.e. of the gray-world illuminant estimate, so brighter pixels
    weigh more than dark ones.
    beta = 0 reproduces the crop's color; beta > 0 exaggerates any tint.
    """
    if beta < 0:
        raise InvalidInputError(f"beta must be >= 0, got {beta}")
    means = unclipped_pixels(crop, linearize(crop)).mean(axis=0)
    c = chromaticity(means)
    factor = (3.0 * c) ** (1.0 + beta)
    return Panorama.uniform(width, height, means.mean() * factor)


class TintBlindEstimator:
    deterministic = True

    def __init__(self, beta: float = 1.0, width: int = 128, height: int = 64):
        if beta < 0:
            raise InvalidInputError(f"beta must be >= 0, got {beta}")
        self.beta = beta
        self.width = width
        self.height = height

    def estimate(self, crop: RasterImage) -> Panorama:
        return tint_blind_estimate(crop, self.beta, self.width, self.height)


# Process protocol

def build_command(template: str, input_path: Path, output_path: Path) -> list[str]:
    """Argument vector for one call of an external command template."""
    tokens = shlex.split(template)
    if not tokens:
        raise InvalidInputError("empty external command")
    if "{input}" in template and "{output}" in template:
        return [t.replace("{input}", str(input_path)).replace("{output}", str(output_path)) for t in tokens]
    return tokens + ["--input", str(input_path), "--output", str(output_path)]


def run_external(
    template: str,
    image: RasterImage,
    timeout: float = DEFAULT_TIMEOUT,
    seed: Optional[int] = None,
) -> RasterImage:
    """Write ``image`` as PNG, run the command in a private temporary directory, read back the PFM."""
    ldr = encode_ldr(image) if image.encoding is Encoding.HDR else image
    with tempfile.TemporaryDirectory(prefix="chromalight-") as tmp:
        input_path = Path(tmp) / "input.png"
        output_path = Path(tmp) / "output.pfm"
        write_ldr(input_path, ldr)
        argv = build_command(template, input_path, output_path)
        env = dict(os.environ)
        if seed is not None:
            env["CHROMALIGHT_SEED"] = str(seed)
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout, cwd=tmp, env=env)
        except FileNotFoundError as e:
            raise EstimatorFailureError(f"cannot start {argv[0]!r}: {e}")
        except subprocess.TimeoutExpired as e:
            stderr = e.stderr.decode(errors="replace") if isinstance(e.stderr, bytes) else (e.stderr or "")
            raise EstimatorFailureError(f"{argv[0]!r} timed out after {timeout:g}s", stderr=stderr)
        if proc.returncode != 0:
            logger.warning("%s exited with %d: %s", argv[0], proc.returncode, proc.stderr[-STDERR_TAIL:])
            raise EstimatorFailureError(
                f"{argv[0]!r} exited with status {proc.returncode}",
                stderr=proc.stderr,
                returncode=proc.returncode,
            )
        if not output_path.exists():
            raise EstimatorFailureError(f"{argv[0]!r} did not write {output_path.name}", stderr=proc.stderr, returncode=0)
        try:
            return read_pfm(output_path)
        except ChromaLightError as e:
            logger.warning("%s produced unusable output: %s", argv[0], e)
            raise EstimatorFailureError(f"{argv[0]!r} produced unusable output: {e}", stderr=proc.stderr, returncode=0)


class ExternalEstimator:
    """A lighting-estimation model run as a separate process, one call per crop."""

    def __init__(self, command: str, timeout: float = DEFAULT_TIMEOUT, seed: Optional[int] = None, deterministic: bool = True):
        self.command = command
        self.timeout = timeout
        self.seed = seed
        self.deterministic = deterministic

    def estimate(self, crop: RasterImage) -> Panorama:
        out = run_external(self.command, crop, self.timeout, self.seed)
        try:
            return Panorama.from_image(out)
        except InvalidInputError as e:
            raise EstimatorFailureError(f"external estimator output is not a panorama: {e}")


def build_estimator(
    spec: EstimatorSpec,
    ground_truth: Optional[Panorama] = None,
    reference: Optional[EquivariantReference] = None,
    timeout: float = DEFAULT_TIMEOUT,
    seed: Optional[int] = None,
) -> LightingEstimator:
    """Instantiate ``spec`` bound to one work item's context (oracle ground truth, equivariant reference)."""
    if spec.kind is EstimatorKind.ORACLE:
        if ground_truth is None:
            raise InvalidInputError("the oracle estimator needs a ground-truth panorama")
        return OracleEstimator(ground_truth)
    if spec.kind is EstimatorKind.EQUIVARIANT_ORACLE:
        if reference is None:
            raise InvalidInputError("the equivariant oracle needs a reference crop and panorama")
        return EquivariantOracle(reference)
    if spec.kind is EstimatorKind.CONSTANT_AMBIENT:
        return ConstantAmbientEstimator(spec.width, spec.height)
    if spec.kind is EstimatorKind.TINT_BLIND:
        return TintBlindEstimator(spec.beta, spec.width, spec.height)
    return ExternalEstimator(spec.command, timeout=timeout, seed=seed, deterministic=spec.deterministic)
