"""Evaluation harness behind the ``chromalight`` subcommands."""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from chromalight import __version__
from chromalight.color import SATURATION_THRESHOLD
from chromalight.dataset import synth_generate
from chromalight.errors import ChromaLightError
from chromalight.estimators import DEFAULT_TIMEOUT, EquivariantReference, build_estimator
from chromalight.geometry import crop_azimuths, extract_crop, resample_panorama
from chromalight.image_io import (
    MedianMode,
    apply_exposure,
    read_ldr,
    read_panorama,
    tonemap_ldr,
    write_ldr,
    write_pfm,
)
from chromalight.metrics import awb_angular_distance, evaluate_pair
from chromalight.models import (
    AggregateReport,
    DatasetManifest,
    EstimatorKind,
    EstimatorSpec,
    EvalRecord,
    ManifestMetadata,
    SceneConfig,
    SceneEntry,
    StrategyId,
    WbSetting,
    WhiteBalancer,
)
from chromalight.raster import Panorama
from chromalight.report import (
    DEFAULT_BIN_MAX,
    DEFAULT_BIN_WIDTH,
    aggregate,
    read_records_csv,
    write_records_csv,
    write_report,
)
from chromalight.strategies import augment_illuminant, run_strategy, wb_train_prepare
from chromalight.transport import TransportMatrix, cache_path, load_or_build_transport, render
from chromalight.utils import run_parallel

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

DEFAULT_SYNTH_SCENES = 20
DEFAULT_SYNTH_TINTS = 8
DEFAULT_PAIR_CROPS = 10


@dataclass(frozen=True)
class View:
    """One crop of one white-balance setting; every strategy is evaluated on it."""
    scene: SceneEntry
    setting: WbSetting
    crop_index: int


@dataclass(frozen=True)
class EvalContext:
    manifest: DatasetManifest
    strategies: Sequence[StrategyId]
    balancer: WhiteBalancer
    estimators: Dict[StrategyId, EstimatorSpec]
    transport: TransportMatrix
    diagonal: bool = False
    timeout: float = DEFAULT_TIMEOUT
    seed: Optional[int] = None
    median_mode: MedianMode = MedianMode.CHANNEL_MEAN


def load_scene_config(path: Optional[PathLike]) -> SceneConfig:
    if path is None:
        return SceneConfig()
    return SceneConfig.model_validate_json(Path(path).read_text(encoding="utf-8"))


def crop_exposure(setting: WbSetting, index: int, pano: Panorama, metadata: ManifestMetadata) -> float:
    """Exposure the crop was tonemapped with; re-derived from the panorama when the manifest has none."""
    if setting.crop_exposures is not None:
        return setting.crop_exposures[index]
    crop = extract_crop(
        pano,
        math.radians(metadata.crop_azimuths_deg[index]),
        math.radians(metadata.crop_fov_deg),
        metadata.crop_size,
    )
    return tonemap_ldr(crop, median_mode=metadata.median_mode)[1]


def _exposed_target(manifest: DatasetManifest, setting: WbSetting, index: int) -> Panorama:
    pano = read_panorama(manifest.resolve(setting.pano_path))
    return apply_exposure(pano, crop_exposure(setting, index, pano, manifest.metadata))


def evaluate_view(view: View, ctx: EvalContext) -> List[EvalRecord]:
    """Records of every strategy on one view; failures become records with ``error`` set."""
    manifest, t = ctx.manifest, ctx.transport
    scene, setting, k = view.scene, view.setting, view.crop_index
    base = {"scene_id": scene.scene_id, "setting_name": setting.name, "crop_index": k}
    try:
        crop = read_ldr(manifest.resolve(setting.crop_paths[k]))
        awb = scene.awb_setting
        awb_crop = crop if awb.name == setting.name else read_ldr(manifest.resolve(awb.crop_paths[k]))
        base["awb_distance_deg"] = 0.0 if awb.name == setting.name else awb_angular_distance(crop, awb_crop)
        target = _exposed_target(manifest, setting, k)
        target_eval = resample_panorama(target, t.env_width, t.env_height)
        target_render = render(t, target_eval)
    except ChromaLightError as e:
        logger.warning("%s/%s crop %d: cannot load view: %s", scene.scene_id, setting.name, k, e)
        return [EvalRecord(strategy=s, error=f"{type(e).__name__}: {e}", **base) for s in ctx.strategies]

    reference = None
    records = []
    for strategy in ctx.strategies:
        spec = ctx.estimators[strategy]
        try:
            if spec.kind is EstimatorKind.EQUIVARIANT_ORACLE and reference is None:
                reference = EquivariantReference(awb_crop, _exposed_target(manifest, awb, k))
            est = build_estimator(spec, ground_truth=target, reference=reference, timeout=ctx.timeout, seed=ctx.seed)
            outcome = run_strategy(strategy, crop, ctx.balancer, est, ctx.diagonal, ctx.timeout)
            estimate = resample_panorama(outcome.panorama, t.env_width, t.env_height)
            metrics = evaluate_pair(t, estimate, target_eval, median_mode=ctx.median_mode, target_render=target_render)
        except ChromaLightError as e:
            logger.warning("%s/%s crop %d, %s failed: %s", scene.scene_id, setting.name, k, strategy.value, e)
            records.append(EvalRecord(strategy=strategy, error=f"{type(e).__name__}: {e}", **base))
            continue
        records.append(EvalRecord(
            strategy=strategy,
            fit_residual=outcome.residual,
            fallback=outcome.fallback,
            **metrics.model_dump(),
            **base,
        ))
    return records


def eval_metadata(ctx: EvalContext, scene_cfg: SceneConfig) -> Dict[str, object]:
    labels = {s.value: ctx.estimators[s].label() for s in ctx.strategies}
    return {
        "tool_version": __version__,
        "delta_e": "CIE76",
        "per_image_reduction": "mean",
        "fit_mask": f"saturation < {SATURATION_THRESHOLD}",
        "fit_mode": "diagonal" if ctx.diagonal else "full",
        "median_mode": ctx.median_mode.value,
        "balancer": ctx.balancer.label(),
        "estimators": labels,
        "nondeterministic_estimators": sorted(
            s.value for s in ctx.strategies if not ctx.estimators[s].deterministic
        ),
        "evaluation_resolution": [ctx.transport.env_width, ctx.transport.env_height],
        "scene_config_hash": scene_cfg.config_hash(),
        "seed": ctx.seed,
    }


def cmd_eval(
    manifest: DatasetManifest,
    strategies: Sequence[StrategyId],
    balancer: WhiteBalancer,
    estimator: EstimatorSpec,
    scene_cfg: SceneConfig,
    out_dir: PathLike,
    strategy_estimators: Optional[Dict[StrategyId, EstimatorSpec]] = None,
    cache_dir: Optional[PathLike] = None,
    jobs: int = 1,
    seed: Optional[int] = None,
    diagonal: bool = False,
    timeout: float = DEFAULT_TIMEOUT,
    bin_width: float = DEFAULT_BIN_WIDTH,
    bin_max: float = DEFAULT_BIN_MAX,
    median_mode: MedianMode = MedianMode.CHANNEL_MEAN,
) -> AggregateReport:
    """Run every strategy on every (scene, setting, crop) and write records.csv, aggregate.json and curves.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    strategies = list(dict.fromkeys(StrategyId(s) for s in strategies))
    estimators = {s: (strategy_estimators or {}).get(s, estimator) for s in strategies}
    ctx = EvalContext(
        manifest=manifest,
        strategies=strategies,
        balancer=balancer,
        estimators=estimators,
        transport=load_or_build_transport(scene_cfg, cache_dir),
        diagonal=diagonal,
        timeout=timeout,
        seed=seed,
        median_mode=MedianMode(median_mode),
    )
    views = [
        View(scene, setting, k)
        for scene in manifest.scenes
        for setting in scene.settings
        for k in range(len(setting.crop_paths))
    ]
    logger.info("evaluating %d views x %d strategies with %d worker(s)", len(views), len(strategies), jobs)
    records = [r for batch in run_parallel(lambda v: evaluate_view(v, ctx), views, jobs) for r in batch]
    records.sort(key=lambda r: r.sort_key)
    write_records_csv(records, out_dir / "records.csv")
    report = aggregate(records, bin_width, bin_max, eval_metadata(ctx, scene_cfg))
    write_report(report, out_dir)
    if report.failure_count:
        logger.warning("%d record(s) failed and were excluded from the aggregates", report.failure_count)
    return report


def cmd_synth(
    out_dir: PathLike,
    n_scenes: int = DEFAULT_SYNTH_SCENES,
    tints_per_scene: int = DEFAULT_SYNTH_TINTS,
    seed: int = 0,
    jobs: int = 1,
    median_mode: MedianMode = MedianMode.CHANNEL_MEAN,
) -> DatasetManifest:
    return synth_generate(n_scenes, tints_per_scene, seed, out_dir, jobs=jobs, median_mode=median_mode)


def cmd_transport(scene_cfg: SceneConfig, cache_dir: PathLike) -> tuple[TransportMatrix, Path]:
    return load_or_build_transport(scene_cfg, cache_dir), cache_path(scene_cfg, cache_dir)


def cmd_report(
    records_csv: PathLike,
    out_dir: Optional[PathLike] = None,
    bin_width: float = DEFAULT_BIN_WIDTH,
    bin_max: float = DEFAULT_BIN_MAX,
) -> AggregateReport:
    """Re-aggregate an existing records.csv (for instance with other bins)."""
    records_csv = Path(records_csv)
    records = read_records_csv(records_csv)
    report = aggregate(records, bin_width, bin_max, {"source": records_csv.name, "tool_version": __version__})
    write_report(report, out_dir if out_dir is not None else records_csv.parent)
    return report


def cmd_pairs(
    panoramas: Sequence[PathLike],
    out_dir: PathLike,
    count: int = DEFAULT_PAIR_CROPS,
    fov_deg: float = 90.0,
    size: int = 256,
    augment: bool = False,
    balancer: Optional[WhiteBalancer] = None,
    seed: int = 0,
    median_mode: MedianMode = MedianMode.CHANNEL_MEAN,
) -> Path:
    """Export training pairs (LDR crop, exposed target panorama) from HDR panoramas.

    With ``augment`` the panorama is re-lit under a randomly drawn illuminant
    before each crop is taken, so crop and target change together. With a
    ``balancer`` the pair is prepared for white-balanced training.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = []
    for p_idx, path in enumerate(panoramas):
        path = Path(path)
        pano = read_panorama(path)
        rng = np.random.default_rng([seed, p_idx])
        for k, azimuth in enumerate(crop_azimuths(count)):
            source, illuminant = pano, None
            if augment:
                source, illuminant = augment_illuminant(pano, rng)
            crop, exposure = tonemap_ldr(
                extract_crop(source, azimuth, math.radians(fov_deg), size), median_mode=median_mode
            )
            target = apply_exposure(source, exposure)
            if balancer is not None:
                crop, target = wb_train_prepare(crop, target, balancer)
            stem = f"{path.stem}_{k:02d}"
            write_ldr(out_dir / f"{stem}.png", crop)
            write_pfm(out_dir / f"{stem}.pfm", target)
            index.append({
                "crop": f"{stem}.png",
                "target": f"{stem}.pfm",
                "source": path.name,
                "azimuth_deg": math.degrees(azimuth),
                "exposure": exposure,
                "illuminant": illuminant.value if illuminant is not None else None,
                "balancer": balancer.label() if balancer is not None else None,
            })
    index_path = out_dir / "pairs.json"
    index_path.write_text(json.dumps({"pairs": index, "seed": seed}, indent=2) + "\n", encoding="utf-8")
    logger.info("wrote %d training pairs to %s", len(index), out_dir)
    return index_path

