import math
import time

import numpy as np
import pytest

from chromalight.errors import InvalidInputError
from chromalight.geometry import (
    crop_azimuths,
    direction_grid,
    direction_to_pixel,
    extract_crop,
    pixel_direction,
    resample_panorama,
    sample_panorama,
    solid_angle_grid,
    weighted_mean,
)
from chromalight.raster import Panorama


@pytest.mark.parametrize("width,height,tol", [(512, 256, 1e-4), (64, 32, 1e-3)])
def test_solid_angles_cover_the_sphere(width, height, tol):
    started = time.perf_counter()
    total = solid_angle_grid(width, height).sum()
    assert abs(total - 4.0 * math.pi) / (4.0 * math.pi) <= tol
    assert time.perf_counter() - started < 1.0


def test_pixel_centers():
    top = pixel_direction(0, 0, 8, 4)
    assert np.linalg.norm(top) == pytest.approx(1.0)
    assert top[2] == pytest.approx(math.cos(math.pi / 8))
    assert top[0] > 0 and top[1] > 0
    assert pixel_direction(3, 0, 8, 4)[2] < 0
    with pytest.raises(InvalidInputError):
        pixel_direction(4, 0, 8, 4)


def test_direction_grid_round_trips_to_pixel_centers():
    grid = direction_grid(16, 8)
    assert np.allclose(grid[2, 5], pixel_direction(2, 5, 16, 8))
    rows, cols = direction_to_pixel(grid, 16, 8)
    assert np.allclose(rows, np.arange(8)[:, None], atol=1e-9)
    assert np.allclose(cols, np.arange(16)[None, :], atol=1e-9)


def test_nearest_sampling_wraps_columns():
    pano = Panorama(np.arange(8 * 3, dtype=float).reshape(1, 8, 3))
    out = sample_panorama(pano, np.array([0.0, 0.0]), np.array([-0.4, 7.6]), "nearest")
    assert np.array_equal(out[0], pano.pixels[0, 0])
    assert np.array_equal(out[1], pano.pixels[0, 0])


def test_crop_azimuths():
    assert crop_azimuths(3) == pytest.approx([0.0, 2 * math.pi / 3, 4 * math.pi / 3])
    with pytest.raises(InvalidInputError):
        crop_azimuths(0)


def test_uniform_panorama_gives_uniform_crop():
    pano = Panorama.uniform(32, 16, (0.2, 0.4, 0.6))
    crop = extract_crop(pano, 1.0, size=12)
    assert crop.size == (12, 12)
    assert np.allclose(crop.pixels, [0.2, 0.4, 0.6], atol=1e-12)


def test_crop_orientation():
    px = np.zeros((32, 64, 3))
    px[:, :32] = 1.0  # azimuths [0, pi)
    px[:16] += 2.0  # upper hemisphere
    pano = Panorama(px)
    east = extract_crop(pano, math.pi / 2, size=16).pixels
    west = extract_crop(pano, 3 * math.pi / 2, size=16).pixels
    assert np.allclose(east[:4], 3.0) and np.allclose(east[-4:], 1.0)
    assert np.allclose(west[:4], 2.0) and np.allclose(west[-4:], 0.0)


@pytest.mark.parametrize("k", [1, 5, 31])
def test_rolling_the_panorama_turns_the_crop(rng, k):
    pano = Panorama(rng.uniform(0.0, 3.0, (16, 32, 3)))
    rolled = Panorama(np.roll(pano.pixels, k, axis=1))
    az = 0.3
    shifted = az + 2.0 * math.pi * k / 32
    near = extract_crop(pano, az, size=12, interpolation="nearest").pixels
    assert np.array_equal(extract_crop(rolled, shifted, size=12, interpolation="nearest").pixels, near)
    smooth = extract_crop(pano, az, size=12).pixels
    assert np.allclose(extract_crop(rolled, shifted, size=12).pixels, smooth, rtol=0.0, atol=1e-12)


def test_crop_is_linear_in_the_panorama(rng):
    p1 = rng.uniform(0.0, 3.0, (16, 32, 3))
    p2 = rng.uniform(0.0, 3.0, (16, 32, 3))
    mixed = extract_crop(Panorama(0.7 * p1 + 2.5 * p2), 1.1, size=12).pixels
    parts = 0.7 * extract_crop(Panorama(p1), 1.1, size=12).pixels + 2.5 * extract_crop(Panorama(p2), 1.1, size=12).pixels
    assert np.allclose(mixed, parts, rtol=0.0, atol=1e-6)


def _exact_areas(width, height):
    edges = np.linspace(0.0, math.pi, height + 1)
    band = np.cos(edges[:-1]) - np.cos(edges[1:])
    return np.broadcast_to((band * 2 * math.pi / width)[:, None], (height, width))


def test_resample_preserves_the_solid_angle_integral(rng):
    pano = Panorama(rng.uniform(0.0, 5.0, (32, 64, 3)))
    small = resample_panorama(pano, 24, 10)
    before = np.einsum("hw,hwc->c", _exact_areas(64, 32), pano.pixels)
    after = np.einsum("hw,hwc->c", _exact_areas(24, 10), small.pixels)
    assert np.allclose(before, after, rtol=1e-12)
    assert resample_panorama(pano, 64, 32) is pano


def test_weighted_mean_of_uniform_panorama():
    assert np.allclose(weighted_mean(Panorama.uniform(16, 8, (1.0, 2.0, 3.0))), [1.0, 2.0, 3.0])
