"""Command-line entry point: chromalight synth|transport|eval|report|pairs."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from chromalight.config import Settings
from chromalight.dataset import load_manifest
from chromalight.errors import ChromaLightError
from chromalight.harness import (
    DEFAULT_PAIR_CROPS,
    DEFAULT_SYNTH_SCENES,
    DEFAULT_SYNTH_TINTS,
    cmd_eval,
    cmd_pairs,
    cmd_report,
    cmd_synth,
    cmd_transport,
    load_scene_config,
)
from chromalight.models import AggregateReport, EstimatorSpec, StrategyId, WhiteBalancer
from chromalight.report import DEFAULT_BIN_MAX, DEFAULT_BIN_WIDTH


def parse_strategy_estimators(items: Optional[List[str]]) -> Dict[StrategyId, EstimatorSpec]:
    """'wbtrain=external:CMD' -> {StrategyId.WB_TRAIN: EstimatorSpec(...)}."""
    out = {}
    for item in items or []:
        name, sep, spec = item.partition("=")
        if not sep:
            raise ValueError(f"expected STRATEGY=ESTIMATOR, got {item!r}")
        out[StrategyId(name.strip().lower())] = EstimatorSpec.parse(spec)
    return out


def build_parser(settings: Settings) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chromalight",
        description="Evaluate color-adaptation strategies for HDR lighting estimation",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="Generate a synthetic multi-white-balance dataset")
    p.add_argument("-o", "--out", required=True, help="Output dataset directory")
    p.add_argument("--scenes", type=int, default=DEFAULT_SYNTH_SCENES, help=f"Number of scenes (default: {DEFAULT_SYNTH_SCENES})")
    p.add_argument("--tints", type=int, default=DEFAULT_SYNTH_TINTS, help=f"Settings per scene, AWB included (default: {DEFAULT_SYNTH_TINTS})")
    p.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")
    p.add_argument("-j", "--jobs", type=int, default=settings.jobs, help="Worker threads")

    p = sub.add_parser("transport", help="Build (or verify) the cached transport matrix")
    p.add_argument("--scene-cfg", default=None, help="SceneConfig JSON (default: built-in scene)")
    p.add_argument("--cache-dir", default=str(settings.cache_dir), help=f"Cache directory (default: {settings.cache_dir})")

    p = sub.add_parser("eval", help="Run strategies over a dataset and aggregate the metrics")
    p.add_argument("-m", "--manifest", required=True, help="Dataset manifest (or its directory)")
    p.add_argument("-s", "--strategies", default="baseline,wbtest", help="Comma-separated strategies (default: baseline,wbtest)")
    p.add_argument("-b", "--balancer", default="gray_world", help="gray_world | shades_of_gray:p=6 | white_patch:pct=95 | identity | external:CMD")
    p.add_argument("-e", "--estimator", default="tintblind:beta=1", help="oracle | equivariant | ambient | tintblind:beta=1 | external:CMD")
    p.add_argument("--strategy-estimator", action="append", metavar="STRATEGY=ESTIMATOR", help="Per-strategy estimator override; repeatable")
    p.add_argument("--scene-cfg", default=None, help="SceneConfig JSON (default: built-in scene)")
    p.add_argument("--cache-dir", default=str(settings.cache_dir), help="Transport cache directory")
    p.add_argument("--seed", type=int, default=0, help="Seed handed to external estimators (default: 0)")
    p.add_argument("-j", "--jobs", type=int, default=settings.jobs, help="Worker threads")
    p.add_argument("--diagonal", action="store_true", help="Fit per-channel gains instead of a full 3x3 matrix")
    p.add_argument("--bin-width", type=float, default=DEFAULT_BIN_WIDTH, help="AWB-distance bin width in degrees")
    p.add_argument("--bin-max", type=float, default=DEFAULT_BIN_MAX, help="Start of the open last bin in degrees")
    p.add_argument("-o", "--out", required=True, help="Output directory")

    p = sub.add_parser("report", help="Re-aggregate an existing records.csv")
    p.add_argument("records", help="Path to records.csv")
    p.add_argument("-o", "--out", default=None, help="Output directory (default: next to records.csv)")
    p.add_argument("--bin-width", type=float, default=DEFAULT_BIN_WIDTH)
    p.add_argument("--bin-max", type=float, default=DEFAULT_BIN_MAX)

    p = sub.add_parser("pairs", help="Export training pairs from HDR panoramas")
    p.add_argument("panoramas", nargs="+", help="HDR panoramas (PFM or EXR)")
    p.add_argument("-o", "--out", required=True, help="Output directory")
    p.add_argument("--count", type=int, default=DEFAULT_PAIR_CROPS, help=f"Crops per panorama (default: {DEFAULT_PAIR_CROPS})")
    p.add_argument("--fov", type=float, default=90.0, help="Crop field of view in degrees")
    p.add_argument("--size", type=int, default=256, help="Crop size in pixels")
    p.add_argument("--augment", action="store_true", help="Chromatic augmentation with a random illuminant per crop")
    p.add_argument("-b", "--balancer", default=None, help="Prepare white-balanced pairs with this balancer")
    p.add_argument("--seed", type=int, default=0)
    return parser


def print_summary(report: AggregateReport) -> None:
    print("-" * 50)
    print("Evaluation Summary")
    print("=" * 50)
    print(f"Records: {report.record_count}")
    print(f"Failed: {report.failure_count}")
    for strategy, metrics in report.strategies.items():
        print(f"\n{strategy.value}:")
        for name, s in metrics.items():
            print(f"  {name:16s} median {s.median:9.4f}  mean {s.mean:9.4f}  [{s.q1:.4f}, {s.q3:.4f}]")


def run(args: argparse.Namespace, settings: Settings) -> int:
    if args.command == "synth":
        manifest = cmd_synth(args.out, args.scenes, args.tints, args.seed, args.jobs, settings.median_mode)
        print(f"Wrote {len(manifest.scenes)} scenes ({manifest.setting_count} settings) to {args.out}")
        return 0

    if args.command == "transport":
        t, path = cmd_transport(load_scene_config(args.scene_cfg), args.cache_dir)
        print(f"Transport matrix {t.shape[0]} x {t.shape[1]} at {path}")
        return 0

    if args.command == "eval":
        manifest = load_manifest(args.manifest, parse_files=True)
        report = cmd_eval(
            manifest,
            StrategyId.parse_list(args.strategies),
            WhiteBalancer.parse(args.balancer),
            EstimatorSpec.parse(args.estimator),
            load_scene_config(args.scene_cfg),
            args.out,
            strategy_estimators=parse_strategy_estimators(args.strategy_estimator),
            cache_dir=args.cache_dir,
            jobs=args.jobs,
            seed=args.seed,
            diagonal=args.diagonal,
            timeout=settings.external_timeout,
            bin_width=args.bin_width,
            bin_max=args.bin_max,
            median_mode=settings.median_mode,
        )
        print_summary(report)
        print(f"\nResults saved to: {Path(args.out)}")
        return 0

    if args.command == "report":
        report = cmd_report(args.records, args.out, args.bin_width, args.bin_max)
        print_summary(report)
        return 0

    balancer = WhiteBalancer.parse(args.balancer) if args.balancer else None
    index = cmd_pairs(
        args.panoramas, args.out, args.count, args.fov, args.size, args.augment, balancer, args.seed, settings.median_mode
    )
    print(f"Training pairs indexed in {index}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    settings = Settings.from_env()
    args = build_parser(settings).parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else settings.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return run(args, settings)
    except (ChromaLightError, ValueError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
