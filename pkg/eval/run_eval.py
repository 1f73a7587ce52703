#!/usr/bin/env python3
"""CLI entry point for the white-balance trend check."""

import argparse
import json
import sys
import tempfile
import time
from datetime import datetime
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

from chromalight.dataset import load_manifest
from chromalight.harness import DEFAULT_SYNTH_SCENES, DEFAULT_SYNTH_TINTS, cmd_eval, cmd_synth
from chromalight.models import AggregateReport, EstimatorSpec, SceneConfig, StrategyId, WhiteBalancer
from chromalight.report import trend_slope

# Load environment variables from .env file
load_dotenv()

MAX_SLOPE_RATIO = 0.3
RISING_BINS = 4


def _bin_means(report: AggregateReport, strategy: StrategyId, metric: str) -> dict:
    return {
        c.bin_lo: getattr(c, metric)
        for c in report.curves
        if c.strategy == strategy and c.count > 0 and getattr(c, metric) is not None
    }


def check_trend(report: AggregateReport, metric: str = "rgb_angular_deg") -> dict:
    """
    Directional checks of the Baseline and WbTest curves.

    Args:
        report (AggregateReport): Aggregate of a Baseline + WbTest evaluation
        metric (str): Metric to check

    Returns:
        dict: Each check with its measured values and a ``passed`` flag
    """

    base = _bin_means(report, StrategyId.BASELINE, metric)
    wrap = _bin_means(report, StrategyId.WB_TEST, metric)

    first = [base.get(lo) for lo in sorted(base)[:RISING_BINS]]
    rising = len(first) == RISING_BINS and all(a < b for a, b in zip(first, first[1:]))

    tinted = [lo for lo in sorted(base) if lo >= 5.0 and lo in wrap]
    below = bool(tinted) and all(wrap[lo] < base[lo] for lo in tinted)

    base_slope = trend_slope(report.curves, StrategyId.BASELINE, metric)
    wrap_slope = trend_slope(report.curves, StrategyId.WB_TEST, metric)
    flat = base_slope > 0 and wrap_slope <= MAX_SLOPE_RATIO * base_slope

    checks = {
        "baseline_rising": {"bin_means": first, "passed": rising},
        "wbtest_below_baseline": {
            "bins": {str(lo): {"baseline": base[lo], "wbtest": wrap[lo]} for lo in tinted},
            "passed": below,
        },
        "wbtest_flatter": {"baseline_slope": base_slope, "wbtest_slope": wrap_slope, "passed": flat},
    }
    checks["passed"] = rising and below and flat
    return checks


def run_trend_eval(
    data_dir: Path,
    out_dir: Path,
    scenes: int = DEFAULT_SYNTH_SCENES,
    tints: int = DEFAULT_SYNTH_TINTS,
    seed: int = 0,
    jobs: int = 1,
    cache_dir: Optional[Path] = None,
) -> tuple[AggregateReport, dict]:
    """
    Generate (or reuse) the synthetic dataset, evaluate Baseline and WbTest, and check the trend.

    Args:
        data_dir (Path): Dataset directory; generated when it has no manifest
        out_dir (Path): Evaluation output directory
        scenes (int): Scenes to generate
        tints (int): Settings per scene, AWB included
        seed (int): Generation seed
        jobs (int): Worker threads
        cache_dir (Path): Transport cache directory

    Returns:
        tuple: The aggregate report and the trend checks
    """

    if not (data_dir / "manifest.json").exists():
        cmd_synth(data_dir, scenes, tints, seed, jobs)
    report = cmd_eval(
        load_manifest(data_dir, parse_files=True),
        [StrategyId.BASELINE, StrategyId.WB_TEST],
        WhiteBalancer(),
        EstimatorSpec.parse("tintblind:beta=1"),
        SceneConfig(),
        out_dir,
        cache_dir=cache_dir,
        jobs=jobs,
        seed=seed,
    )
    return report, check_trend(report)


def main():
    parser = argparse.ArgumentParser(
        description="Check that the white-balance wrap flattens the error-vs-AWB-distance curve"
    )
    parser.add_argument(
        "-d", "--data",
        default=None,
        help="Synthetic dataset directory (default: a temporary directory)"
    )
    parser.add_argument(
        "-o", "--output",
        default=None,
        help="Output directory for results (default: eval/results)"
    )
    parser.add_argument("--scenes", type=int, default=DEFAULT_SYNTH_SCENES, help="Scenes to generate")
    parser.add_argument("--tints", type=int, default=DEFAULT_SYNTH_TINTS, help="Settings per scene")
    parser.add_argument("--seed", type=int, default=0, help="Generation seed (default: 0)")
    parser.add_argument("-j", "--jobs", type=int, default=1, help="Worker threads")
    args = parser.parse_args()

    eval_dir = Path(__file__).parent
    output_dir = Path(args.output) if args.output else eval_dir / "results"
    output_dir.mkdir(parents=True, exist_ok=True)
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")

    started = time.perf_counter()
    with tempfile.TemporaryDirectory(prefix="chromalight-trend-") as tmp:
        data_dir = Path(args.data) if args.data else Path(tmp) / "data"
        print(f"Evaluating {args.scenes} scenes x {args.tints} settings (seed {args.seed})...")
        print("-" * 50)
        report, checks = run_trend_eval(
            data_dir, Path(tmp) / "eval", args.scenes, args.tints, args.seed, args.jobs, Path(tmp) / "cache"
        )
    elapsed = time.perf_counter() - started

    print("\nTrend Check Summary")
    print("=" * 50)
    print(f"Records: {report.record_count} ({report.failure_count} failed)")
    for name in ("baseline_rising", "wbtest_below_baseline", "wbtest_flatter"):
        print(f"  {name}: {'pass' if checks[name]['passed'] else 'FAIL'}")
    print(f"  slopes: baseline {checks['wbtest_flatter']['baseline_slope']:.3f}, "
          f"wbtest {checks['wbtest_flatter']['wbtest_slope']:.3f} deg/deg")
    print(f"Runtime: {elapsed:.1f}s")

    output_path = output_dir / f"eval_{timestamp}.json"
    with open(output_path, "w", encoding="utf-8") as f:
        json.dump({
            "checks": checks,
            "runtime_s": elapsed,
            "aggregate": json.loads(report.model_dump_json()),
        }, f, indent=2)
    print(f"\nResults saved to: {output_path}")

    badge_data = {
        "schemaVersion": 1,
        "label": "wb trend",
        "message": "passing" if checks["passed"] else "failing",
        "color": "brightgreen" if checks["passed"] else "red",
    }
    badge_path = eval_dir / "badge.json"
    with open(badge_path, "w", encoding="utf-8") as f:
        json.dump(badge_data, f, indent=2)
        f.write("\n")
    print(f"Badge updated: {badge_path}")

    sys.exit(0 if checks["passed"] else 1)


if __name__ == "__main__":
    main()
