"""Multi-white-balance datasets: manifest loading and validation, a synthetic generator, and a release-tree converter.

A dataset is a directory holding ``manifest.json``. Every scene lists its
white-balance settings; each setting has one HDR panorama (PFM or EXR) and one
LDR crop (PNG) per crop azimuth. Paths are relative to the manifest.
"""

import json
import logging
import math
import os
import re
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from pydantic import ValidationError

from chromalight import __version__
from chromalight.color import Illuminant, apply_color_matrix, rgb_adaptation_matrix
from chromalight.errors import ChromaLightError, ManifestValidationError
from chromalight.geometry import direction_grid, extract_crop
from chromalight.image_io import (
    HDR_SUFFIXES,
    LDR_SUFFIXES,
    MedianMode,
    read_image,
    read_pfm,
    tonemap_ldr,
    write_ldr,
    write_pfm,
)
from chromalight.models import (
    CAMERA_WB_SETTINGS,
    DatasetManifest,
    IssueCode,
    ManifestIssue,
    ManifestMetadata,
    SceneEntry,
    WbSetting,
)
from chromalight.raster import Panorama, RasterImage
from chromalight.utils import run_parallel

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

MANIFEST_NAME = "manifest.json"
AWB_SETTING = "auto"
SYNTH_PANO_WIDTH = 128
SYNTH_PANO_HEIGHT = 64
# 90-degree crops on the horizon see up to 45 degrees of elevation; a light
# reaches 1.5 radii from its center
LIGHT_MIN_ELEVATION_DEG = 62.0
LIGHT_MAX_RADIUS_DEG = 10.0


# Loading and validation

def _scene_id_at(data, loc) -> Optional[str]:
    if len(loc) >= 2 and loc[0] == "scenes" and isinstance(loc[1], int):
        try:
            return str(data["scenes"][loc[1]].get("scene_id"))
        except (KeyError, IndexError, TypeError, AttributeError):
            return None
    return None


def validate_manifest(
    manifest: DatasetManifest,
    check_files: bool = True,
    parse_files: bool = False,
) -> List[ManifestIssue]:
    """Every semantic problem of a schema-valid manifest, in scene order."""
    issues = []
    if not manifest.scenes:
        issues.append(ManifestIssue(code=IssueCode.SCHEMA, detail="manifest lists no scenes"))
    expected_crops = len(manifest.metadata.crop_azimuths_deg)
    seen = set()
    for scene in manifest.scenes:
        sid = scene.scene_id
        if sid in seen:
            issues.append(ManifestIssue(code=IssueCode.SCHEMA, scene_id=sid, detail="scene_id appears twice"))
        seen.add(sid)
        names = [s.name for s in scene.settings]
        for name in sorted({n for n in names if names.count(n) > 1}):
            issues.append(ManifestIssue(code=IssueCode.DUPLICATE_SETTING, scene_id=sid, detail=f"setting {name!r} is listed more than once"))
        if scene.awb_setting_name not in names:
            issues.append(ManifestIssue(code=IssueCode.MISSING_AWB, scene_id=sid, detail=f"no {scene.awb_setting_name!r} (AWB) setting"))
        for s in scene.settings:
            if len(s.crop_paths) != expected_crops:
                issues.append(ManifestIssue(
                    code=IssueCode.CROP_COUNT, scene_id=sid,
                    detail=f"setting {s.name!r} has {len(s.crop_paths)} crops, expected {expected_crops}",
                ))
            if s.crop_exposures is not None and len(s.crop_exposures) != len(s.crop_paths):
                issues.append(ManifestIssue(code=IssueCode.SCHEMA, scene_id=sid, detail=f"setting {s.name!r}: one exposure per crop is required"))
            if s.tint_matrix is not None and len(s.tint_matrix) != 9:
                issues.append(ManifestIssue(code=IssueCode.SCHEMA, scene_id=sid, detail=f"setting {s.name!r}: tint_matrix needs 9 entries"))
            if not check_files:
                continue
            for rel in [s.pano_path, *s.crop_paths]:
                path = manifest.resolve(rel)
                if not path.is_file():
                    issues.append(ManifestIssue(code=IssueCode.DANGLING_PATH, scene_id=sid, detail=f"{rel} does not exist"))
                elif parse_files:
                    try:
                        read_image(path)
                    except (ChromaLightError, OSError) as e:
                        issues.append(ManifestIssue(code=IssueCode.UNREADABLE, scene_id=sid, detail=f"{rel}: {e}"))
    return issues


def load_manifest(path: PathLike, check_files: bool = True, parse_files: bool = False) -> DatasetManifest:
    """Load and validate a manifest; raises ManifestValidationError listing every violation."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ManifestValidationError([ManifestIssue(code=IssueCode.SCHEMA, detail=f"{path}: {e}")])
    try:
        manifest = DatasetManifest.model_validate(data)
    except ValidationError as e:
        raise ManifestValidationError([
            ManifestIssue(
                code=IssueCode.SCHEMA,
                scene_id=_scene_id_at(data, err["loc"]),
                detail=f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}",
            )
            for err in e.errors()
        ])
    manifest = manifest.model_copy(update={"root": str(path.parent)})
    issues = validate_manifest(manifest, check_files, parse_files)
    if issues:
        raise ManifestValidationError(issues)
    return manifest


def write_manifest(manifest: DatasetManifest, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


# Synthetic generation

def _jitter(rng: np.random.Generator, amount: float) -> np.ndarray:
    return 1.0 + rng.uniform(-amount, amount, 3)


def _random_direction(rng: np.random.Generator, min_elev_deg: float, max_elev_deg: float) -> np.ndarray:
    elev = math.radians(rng.uniform(min_elev_deg, max_elev_deg))
    az = rng.uniform(0.0, 2.0 * math.pi)
    return np.array([math.cos(elev) * math.cos(az), math.cos(elev) * math.sin(az), math.sin(elev)])


def procedural_panorama(rng: np.random.Generator, width: int = SYNTH_PANO_WIDTH, height: int = SYNTH_PANO_HEIGHT) -> Panorama:
    """Neutrally balanced HDR environment: a sky/ground gradient, colored surroundings and 1-3 area lights.

    The horizon band the crops look at stays within a few stops and its
    colored patches stay within 15% of gray per channel, so crops span all
    three color dimensions and no Bradford tint between the CIE illuminants
    drives a channel negative. Lights sit above every crop's field of view.
    """
    dirs = direction_grid(width, height)
    z = dirs[..., 2]
    zenith = rng.uniform(0.6, 1.0) * _jitter(rng, 0.05)
    horizon = rng.uniform(0.7, 1.0) * _jitter(rng, 0.05)
    ground = rng.uniform(0.45, 0.7) * _jitter(rng, 0.05)
    t = np.clip(z, 0.0, 1.0)[..., None]
    pixels = np.where((z >= 0.0)[..., None], horizon * (1.0 - t) + zenith * t, ground)
    for _ in range(int(rng.integers(6, 11))):
        center = _random_direction(rng, -40.0, 20.0)
        radius = math.radians(rng.uniform(12.0, 25.0))
        hue = rng.uniform(-1.0, 1.0, 3)
        color = rng.uniform(0.5, 0.9) * (1.0 + 0.1 * (hue - hue.mean()))
        angle = np.arccos(np.clip(dirs @ center, -1.0, 1.0))
        w = np.exp(-((angle / radius) ** 2))[..., None]
        pixels = pixels * (1.0 - w) + color * w
    for _ in range(int(rng.integers(1, 4))):
        center = _random_direction(rng, LIGHT_MIN_ELEVATION_DEG, 85.0)
        radius = math.radians(rng.uniform(3.0, LIGHT_MAX_RADIUS_DEG))
        color = rng.uniform(5.0, 50.0) * _jitter(rng, 0.05)
        cos = dirs @ center
        falloff = np.clip((cos - math.cos(1.5 * radius)) / (math.cos(radius) - math.cos(1.5 * radius)), 0.0, 1.0)
        pixels = pixels + color * falloff[..., None]
    return Panorama(np.maximum(pixels, 0.0))


def draw_tint(rng: np.random.Generator) -> tuple[Illuminant, Illuminant, np.ndarray]:
    """Bradford RGB tint between two distinct CIE illuminants."""
    illuminants = list(Illuminant)
    i, j = rng.choice(len(illuminants), size=2, replace=False)
    src, dst = illuminants[int(i)], illuminants[int(j)]
    return src, dst, rgb_adaptation_matrix(src, dst)


def tonemapped_crops(pano: Panorama, metadata: ManifestMetadata) -> List[tuple[RasterImage, float]]:
    """The LDR crops of a panorama with their exposures, as stored in a dataset."""
    fov = math.radians(metadata.crop_fov_deg)
    out = []
    for az in metadata.crop_azimuths_deg:
        crop = extract_crop(pano, math.radians(az), fov, metadata.crop_size)
        out.append(tonemap_ldr(crop, median_mode=metadata.median_mode))
    return out


def _write_setting(out_dir: Path, scene_id: str, name: str, pano: Panorama, metadata: ManifestMetadata, **extra) -> WbSetting:
    rel_dir = f"{scene_id}/{name}"
    (out_dir / rel_dir).mkdir(parents=True, exist_ok=True)
    pano_rel = f"{rel_dir}/pano.pfm"
    write_pfm(out_dir / pano_rel, pano)
    # crops come from the stored float32 panorama so they can be re-derived from it exactly
    stored = Panorama.from_image(read_pfm(out_dir / pano_rel))
    crop_paths, exposures = [], []
    for k, (ldr, exposure) in enumerate(tonemapped_crops(stored, metadata)):
        crop_rel = f"{rel_dir}/crop{k}.png"
        write_ldr(out_dir / crop_rel, ldr)
        crop_paths.append(crop_rel)
        exposures.append(exposure)
    return WbSetting(name=name, pano_path=pano_rel, crop_paths=crop_paths, crop_exposures=exposures, **extra)


def synth_scene(index: int, tints_per_scene: int, seed: int, out_dir: Path, metadata: ManifestMetadata) -> SceneEntry:
    # one stream per scene, so the output does not depend on scheduling
    rng = np.random.default_rng([seed, index])
    scene_id = f"scene{index:03d}"
    neutral = procedural_panorama(rng)
    settings = [_write_setting(out_dir, scene_id, AWB_SETTING, neutral, metadata)]
    for k in range(1, tints_per_scene):
        src, dst, m = draw_tint(rng)
        name = f"tint{k:02d}_{src.value}_to_{dst.value}"
        settings.append(_write_setting(
            out_dir, scene_id, name, apply_color_matrix(neutral, m), metadata,
            tint_matrix=m.reshape(-1).tolist(),
            illuminants=[src.value, dst.value],
        ))
    logger.debug("generated %s with %d settings", scene_id, len(settings))
    return SceneEntry(scene_id=scene_id, settings=settings, awb_setting_name=AWB_SETTING)


def synth_generate(
    n_scenes: int,
    tints_per_scene: int,
    seed: int,
    out_dir: PathLike,
    jobs: int = 1,
    crop_size: int = 256,
    median_mode: MedianMode = MedianMode.CHANNEL_MEAN,
) -> DatasetManifest:
    """Write a synthetic multi-white-balance dataset and its manifest.

    ``tints_per_scene`` counts every setting of a scene, the neutral AWB one
    included. The tree is byte-identical for a given seed.
    """
    if n_scenes < 1:
        raise ValueError("n_scenes must be >= 1")
    if tints_per_scene < 2:
        raise ValueError("tints_per_scene must be >= 2 (the AWB setting plus at least one tint)")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metadata = ManifestMetadata(
        crop_size=crop_size,
        median_mode=median_mode,
        tool="chromalight synth",
        tool_version=__version__,
        seed=seed,
    )
    scenes = run_parallel(
        lambda i: synth_scene(i, tints_per_scene, seed, out_dir, metadata),
        range(n_scenes),
        jobs,
    )
    manifest = DatasetManifest(scenes=scenes, metadata=metadata, root=str(out_dir))
    write_manifest(manifest, out_dir / MANIFEST_NAME)
    logger.info("wrote %d scenes x %d settings to %s", n_scenes, tints_per_scene, out_dir)
    return manifest


# Public release layout: <scene>/<img>_<Setting>.exr and <scene>/<img>_<Setting>_<cropidx>.jpg

_SETTING_ALTERNATIVES = "|".join(sorted(CAMERA_WB_SETTINGS, key=len, reverse=True))
_RELEASE_CROP = re.compile(rf"^(?P<img>.+)_(?P<setting>{_SETTING_ALTERNATIVES})_(?P<crop>\d+)$", re.IGNORECASE)
_RELEASE_PANO = re.compile(rf"^(?P<img>.+)_(?P<setting>{_SETTING_ALTERNATIVES})$", re.IGNORECASE)


def _normalize_setting(name: str) -> str:
    return name.lower().replace("-", "_")


def manifest_from_release_tree(
    root: PathLike,
    manifest_dir: Optional[PathLike] = None,
    crop_azimuths_deg: Sequence[float] = (0.0, 120.0, 240.0),
) -> DatasetManifest:
    """Build a manifest by walking a release tree.

    Files whose names do not follow the naming convention are skipped with a
    debug message. The naming convention is provisional.
    """
    root = Path(root)
    manifest_dir = Path(manifest_dir) if manifest_dir is not None else root
    scenes = []
    for scene_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        panos, crops = {}, {}
        for f in sorted(scene_dir.iterdir()):
            suffix = f.suffix.lower()
            rel = os.path.relpath(f, manifest_dir).replace(os.sep, "/")
            if suffix in LDR_SUFFIXES and (m := _RELEASE_CROP.match(f.stem)):
                key = (m["img"], _normalize_setting(m["setting"]))
                crops.setdefault(key, []).append((int(m["crop"]), rel))
            elif suffix in HDR_SUFFIXES and (m := _RELEASE_PANO.match(f.stem)):
                panos[(m["img"], _normalize_setting(m["setting"]))] = rel
            else:
                logger.debug("skipping %s", f)
        images = sorted({img for img, _ in panos})
        for img in images:
            scene_id = scene_dir.name if len(images) == 1 else f"{scene_dir.name}_{img}"
            settings = [
                WbSetting(name=setting, pano_path=pano, crop_paths=[rel for _, rel in sorted(crops.get((i, setting), []))])
                for (i, setting), pano in sorted(panos.items())
                if i == img
            ]
            scenes.append(SceneEntry(scene_id=scene_id, settings=settings, awb_setting_name=AWB_SETTING))
    metadata = ManifestMetadata(
        crop_azimuths_deg=list(crop_azimuths_deg),
        tool="chromalight convert_release",
        tool_version=__version__,
    )
    return DatasetManifest(scenes=scenes, metadata=metadata, root=str(manifest_dir))
