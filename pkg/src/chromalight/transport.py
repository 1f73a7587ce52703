"""Light transport for the evaluation scene: nine diffuse spheres on a plane, viewed from above.

Each render pixel casts one orthographic ray straight down. The transport
entry for environment direction w_i is (rho / pi) * max(0, n . w_i) * V * dw_i,
with V = 0 when the direction points below the plane or hits another sphere.
There are no interreflections.
"""

import logging
import math
import os
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Optional, Union

import numpy as np
from numpy.typing import NDArray

from chromalight.errors import DimensionMismatchError, TransportCacheError
from chromalight.geometry import direction_grid, solid_angle_grid
from chromalight.models import SceneConfig
from chromalight.raster import Encoding, Panorama, RasterImage

logger = logging.getLogger(__name__)

CACHE_MAGIC = b"CLTM"
CACHE_VERSION = 1
_CACHE_HEADER = struct.Struct("<4sI32sII")

MISS = -2
PLANE = -1


@dataclass(frozen=True, eq=False)
class TransportMatrix:
    """Dense (render_size**2) x (env_width * env_height) map shared by the three channels."""
    data: NDArray[np.float64]
    render_size: int
    env_width: int
    env_height: int
    config_hash: str = ""

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @cached_property
    def row_sums(self) -> NDArray[np.float64]:
        """Render of a unit white environment, one value per render pixel."""
        return self.data.sum(axis=1)


@dataclass(frozen=True)
class PrimaryHits:
    points: NDArray[np.float64]
    normals: NDArray[np.float64]
    albedo: NDArray[np.float64]
    surface: NDArray[np.int64]  # sphere index, PLANE or MISS


def render_pixel_xy(cfg: SceneConfig) -> NDArray[np.float64]:
    """render_size x render_size x 2 world (x, y) of pixel centers; row 0 is at +y."""
    n = cfg.render_size
    f = cfg.camera_footprint
    t = -f + (np.arange(n) + 0.5) * (2.0 * f / n)
    x, y = np.meshgrid(t, t[::-1])
    return np.stack([x, y], axis=-1)


def primary_hits(cfg: SceneConfig) -> PrimaryHits:
    xy = render_pixel_xy(cfg).reshape(-1, 2)
    count = xy.shape[0]
    points = np.zeros((count, 3))
    points[:, :2] = xy
    normals = np.zeros((count, 3))
    normals[:, 2] = 1.0
    albedo = np.full(count, cfg.plane_albedo)
    surface = np.full(count, PLANE, dtype=np.int64)
    off_plane = np.any(np.abs(xy) > cfg.plane_extent, axis=1)
    surface[off_plane] = MISS
    r = cfg.sphere_radius
    for k, (cx, cy, cz) in enumerate(cfg.sphere_centers):
        d2 = (xy[:, 0] - cx) ** 2 + (xy[:, 1] - cy) ** 2
        inside = d2 < r * r
        # spheres do not overlap, so a vertical ray meets at most one
        z = cz + np.sqrt(np.maximum(r * r - d2[inside], 0.0))
        points[inside, 2] = z
        normals[inside] = (points[inside] - np.array([cx, cy, cz])) / r
        albedo[inside] = cfg.sphere_albedo
        surface[inside] = k
    miss = surface == MISS
    albedo[miss] = 0.0
    return PrimaryHits(points, normals, albedo, surface)


def build_transport(cfg: SceneConfig, chunk_size: int = 256) -> TransportMatrix:
    """Precompute the transport matrix; deterministic for a given configuration."""
    dirs = direction_grid(cfg.env_width, cfg.env_height).reshape(-1, 3)
    d_omega = solid_angle_grid(cfg.env_width, cfg.env_height).reshape(-1)
    above = dirs[:, 2] > 0.0
    hits = primary_hits(cfg)
    centers = np.array(cfg.sphere_centers)
    r2 = cfg.sphere_radius ** 2
    rows = hits.points.shape[0]
    data = np.zeros((rows, dirs.shape[0]))
    for start in range(0, rows, chunk_size):
        sl = slice(start, min(start + chunk_size, rows))
        p = hits.points[sl]
        own = hits.surface[sl]
        cos = hits.normals[sl] @ dirs.T
        visible = (cos > 0.0) & above[None, :] & (own != MISS)[:, None]
        for k, c in enumerate(centers):
            oc = p - c
            b = oc @ dirs.T
            disc = b * b - (np.einsum("ij,ij->i", oc, oc) - r2)[:, None]
            # origin lies outside sphere k, so a hit at t > 0 needs b < 0
            blocked = (disc > 0.0) & (b < 0.0)
            blocked[own == k] = False
            visible &= ~blocked
        data[sl] = np.where(visible, (hits.albedo[sl] / math.pi)[:, None] * cos * d_omega[None, :], 0.0)
    logger.debug("built %dx%d transport matrix", *data.shape)
    return TransportMatrix(data, cfg.render_size, cfg.env_width, cfg.env_height, cfg.config_hash())


def _check_env(t: TransportMatrix, env: RasterImage) -> None:
    if (env.width, env.height) != (t.env_width, t.env_height):
        raise DimensionMismatchError(
            f"environment is {env.width}x{env.height}, transport expects {t.env_width}x{t.env_height}"
        )


def render(t: TransportMatrix, env: Panorama) -> RasterImage:
    """Per-channel product T @ L, shaped as a render_size x render_size image."""
    _check_env(t, env)
    px = env.pixels.reshape(-1, 3)
    if np.all(px == px[0]):
        # constant environment: every row of T collapses to its sum
        out = np.outer(t.row_sums, px[0])
    else:
        out = t.data @ px
    return RasterImage(np.maximum(out, 0.0).reshape(t.render_size, t.render_size, 3), Encoding.HDR)


def render_loss(t: TransportMatrix, L: Panorama, L_star: Panorama) -> float:
    """Mean absolute difference between T @ L and T @ L* over pixels and channels."""
    _check_env(t, L)
    _check_env(t, L_star)
    return float(np.mean(np.abs(render(t, L).pixels - render(t, L_star).pixels)))


# Cache file: magic, version, SHA-256 of the config, rows, cols, then little-endian float32 row-major.

def cache_path(cfg: SceneConfig, cache_dir: Union[str, Path]) -> Path:
    return Path(cache_dir) / f"transport_{cfg.config_hash()[:16]}.bin"


def save_transport(path: Union[str, Path], t: TransportMatrix) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows, cols = t.shape
    header = _CACHE_HEADER.pack(CACHE_MAGIC, CACHE_VERSION, bytes.fromhex(t.config_hash), rows, cols)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(t.data, dtype="<f4").tobytes())
    os.replace(tmp, path)


def load_transport(path: Union[str, Path], cfg: SceneConfig) -> TransportMatrix:
    raw = Path(path).read_bytes()
    if len(raw) < _CACHE_HEADER.size:
        raise TransportCacheError(f"{path}: truncated header")
    magic, version, digest, rows, cols = _CACHE_HEADER.unpack_from(raw)
    if magic != CACHE_MAGIC or version != CACHE_VERSION:
        raise TransportCacheError(f"{path}: not a version {CACHE_VERSION} transport cache")
    if digest.hex() != cfg.config_hash():
        raise TransportCacheError(f"{path}: cache belongs to another scene configuration")
    if (rows, cols) != (cfg.render_size ** 2, cfg.env_width * cfg.env_height):
        raise TransportCacheError(f"{path}: unexpected dimensions {rows}x{cols}")
    payload = raw[_CACHE_HEADER.size:]
    if len(payload) != rows * cols * 4:
        raise TransportCacheError(f"{path}: expected {rows * cols * 4} payload bytes, found {len(payload)}")
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, cols).astype(np.float64)
    return TransportMatrix(data, cfg.render_size, cfg.env_width, cfg.env_height, cfg.config_hash())


def load_or_build_transport(cfg: SceneConfig, cache_dir: Optional[Union[str, Path]]) -> TransportMatrix:
    """Matrix for ``cfg`` as stored in the cache, building and caching it on a miss."""
    if cache_dir is None:
        return build_transport(cfg)
    path = cache_path(cfg, cache_dir)
    if path.exists():
        try:
            t = load_transport(path, cfg)
            logger.info("transport cache hit: %s", path)
            return t
        except TransportCacheError as e:
            logger.warning("ignoring unusable transport cache: %s", e)
    logger.info("transport cache miss, building %d x %d matrix", cfg.render_size ** 2, cfg.env_width * cfg.env_height)
    save_transport(path, build_transport(cfg))
    return load_transport(path, cfg)
