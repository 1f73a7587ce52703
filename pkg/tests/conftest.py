import numpy as np
import pytest

from chromalight.dataset import synth_generate
from chromalight.models import SceneConfig
from chromalight.raster import Encoding, Panorama, RasterImage


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_cfg():
    return SceneConfig(render_size=8, env_width=16, env_height=8)


@pytest.fixture
def rank3_crop(rng):
    """HDR crop whose pixels span all three color dimensions, well away from clipping."""
    return RasterImage(rng.uniform(0.1, 0.6, (16, 16, 3)), Encoding.HDR)


@pytest.fixture
def random_pano(rng):
    return Panorama(rng.uniform(0.05, 2.0, (8, 16, 3)))


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """Two synthetic scenes with the AWB setting and two tints each, 64-pixel crops."""
    out = tmp_path_factory.mktemp("tiny_dataset")
    manifest = synth_generate(2, 3, seed=7, out_dir=out, crop_size=64)
    return out, manifest
