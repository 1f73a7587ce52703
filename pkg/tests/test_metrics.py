import numpy as np
import pytest

from chromalight.color import rgb_array_to_lab
from chromalight.errors import DimensionMismatchError
from chromalight.metrics import angular_chroma_loss, awb_angular_distance, evaluate_pair, exposed_lab
from chromalight.models import SceneConfig
from chromalight.raster import Encoding, Panorama, RasterImage
from chromalight.transport import build_transport, render
from tests import oracles


@pytest.fixture(scope="module")
def transport():
    return build_transport(SceneConfig(render_size=4, env_width=8, env_height=4, camera_footprint=2.1))


def test_chroma_loss_identity_is_zero(random_pano):
    assert angular_chroma_loss(random_pano, random_pano) == pytest.approx(0.0, abs=1e-12)


def test_chroma_loss_of_orthogonal_chromaticities():
    red = Panorama.uniform(64, 32, (1.0, 0.0, 0.0))
    green = Panorama.uniform(64, 32, (0.0, 1.0, 0.0))
    assert angular_chroma_loss(red, green) == pytest.approx(1.0, abs=1e-3)


def test_chroma_loss_is_scale_invariant_and_symmetric(rng):
    a = Panorama(rng.uniform(0.0, 2.0, (8, 16, 3)))
    b = Panorama(rng.uniform(0.0, 2.0, (8, 16, 3)))
    scale = rng.uniform(0.1, 10.0, (8, 16, 1))
    base = angular_chroma_loss(a, b)
    assert angular_chroma_loss(Panorama(a.pixels * 3.7), b) == pytest.approx(base, abs=1e-9)
    assert angular_chroma_loss(Panorama(a.pixels * scale), b) == pytest.approx(base, abs=1e-9)
    assert angular_chroma_loss(a, b) == angular_chroma_loss(b, a)


def test_chroma_loss_treats_black_as_neutral():
    black = Panorama.uniform(16, 8, (0.0, 0.0, 0.0))
    gray = Panorama.uniform(16, 8, (0.5, 0.5, 0.5))
    assert angular_chroma_loss(black, gray) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DimensionMismatchError):
        angular_chroma_loss(black, Panorama.uniform(8, 4, (1.0, 1.0, 1.0)))


def test_identical_estimate_scores_zero(transport, rng):
    L = Panorama(rng.uniform(0.1, 2.0, (4, 8, 3)))
    report = evaluate_pair(transport, L, L)
    assert report.delta_e == 0.0
    assert report.rgb_angular_deg == 0.0
    assert report.render_l1 == 0.0
    assert report.ang_loss == pytest.approx(0.0, abs=1e-12)


def test_intensity_error_shows_only_in_delta_e(transport, rng):
    L = Panorama(rng.uniform(0.1, 2.0, (4, 8, 3)))
    report = evaluate_pair(transport, Panorama(2.0 * L.pixels), L)
    assert report.delta_e > 0.1
    assert report.rgb_angular_deg == pytest.approx(0.0, abs=1e-6)
    assert report.ang_loss == pytest.approx(0.0, abs=1e-12)


def test_evaluate_pair_matches_scalar_oracle(transport, rng):
    L_star = Panorama(rng.uniform(0.1, 2.0, (4, 8, 3)))
    L = Panorama(L_star.pixels * [1.2, 1.0, 0.8])
    report = evaluate_pair(transport, L, L_star)

    T = transport.data
    r = [[sum(T[i, j] * L.pixels.reshape(-1, 3)[j, c] for j in range(T.shape[1])) for c in range(3)] for i in range(T.shape[0])]
    r_star = [[sum(T[i, j] * L_star.pixels.reshape(-1, 3)[j, c] for j in range(T.shape[1])) for c in range(3)] for i in range(T.shape[0])]
    exposure = 0.45 / float(np.median([sum(p) / 3.0 for p in r_star]))

    def exposed(p):
        return oracles.lab([min(max(exposure * v, 0.0), 1.0) for v in p])

    de = np.mean([oracles.delta_e76(exposed(p), exposed(q)) for p, q in zip(r, r_star)])
    angle = np.mean([oracles.angle_deg(p, q) for p, q in zip(r, r_star)])
    l1 = np.mean([abs(a - b) for p, q in zip(r, r_star) for a, b in zip(p, q)])
    assert report.delta_e == pytest.approx(de, abs=1e-9)
    assert report.rgb_angular_deg == pytest.approx(angle, abs=1e-9)
    assert report.render_l1 == pytest.approx(l1, abs=1e-9)
    assert report.delta_e > 0 and report.ang_loss > 0


def test_precomputed_target_render_gives_the_same_report(transport, rng):
    L_star = Panorama(rng.uniform(0.1, 2.0, (4, 8, 3)))
    L = Panorama(L_star.pixels * [1.2, 1.0, 0.8])
    shared = evaluate_pair(transport, L, L_star, target_render=render(transport, L_star))
    assert shared == evaluate_pair(transport, L, L_star)


def test_exposed_lab_only_scales_and_clips(rng):
    px = rng.uniform(0.0, 1.5, (16, 3))
    assert np.array_equal(exposed_lab(px, 0.8), rgb_array_to_lab(np.clip(0.8 * px, 0.0, 1.0)))



def test_awb_distance():
    gray = RasterImage(np.full((4, 4, 3), 0.5))
    tinted = RasterImage(gray.pixels * [2.0, 1.0, 1.0])
    assert awb_angular_distance(gray, gray) == 0.0
    assert awb_angular_distance(tinted, gray) == pytest.approx(19.4712206, abs=1e-6)
    assert awb_angular_distance(gray, tinted) == awb_angular_distance(tinted, gray)


def test_awb_distance_linearizes_ldr():
    awb = RasterImage(np.full((2, 2, 3), 0.5), Encoding.LDR)
    shifted = RasterImage(np.full((2, 2, 3), 0.5) * [1.0, 1.0, 0.5], Encoding.LDR)
    lin = np.array([0.5, 0.5, 0.25]) ** 2.2
    expected = np.degrees(np.arccos(lin.sum() / (np.linalg.norm(lin) * np.sqrt(3.0))))
    assert awb_angular_distance(shifted, awb) == pytest.approx(expected, abs=1e-9)
