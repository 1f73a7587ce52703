"""Evaluation records on disk, boxplot statistics and AWB-distance curves."""

import math
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from chromalight.errors import EmptyRecordsError
from chromalight.models import (
    METRIC_NAMES,
    AggregateReport,
    CurveBin,
    EvalRecord,
    MetricSummary,
    StrategyId,
)

PathLike = Union[str, Path]

RECORD_COLUMNS = list(EvalRecord.model_fields)
DEFAULT_BIN_WIDTH = 5.0
DEFAULT_BIN_MAX = 40.0
WHISKER_IQR = 1.5


def records_frame(records: Iterable[EvalRecord]) -> pd.DataFrame:
    """Records as a DataFrame in canonical row order."""
    rows = [r.model_dump(mode="json") for r in sorted(records, key=lambda r: r.sort_key)]
    return pd.DataFrame(rows, columns=RECORD_COLUMNS)


def write_records_csv(records: Iterable[EvalRecord], path: PathLike) -> Path:
    path = Path(path)
    records_frame(records).to_csv(path, index=False)
    return path


def read_records_csv(path: PathLike) -> List[EvalRecord]:
    try:
        df = pd.read_csv(path, dtype={"scene_id": str, "setting_name": str, "error": str}, float_precision="round_trip")
    except pd.errors.EmptyDataError:
        raise EmptyRecordsError(f"{path} is empty")
    if df.empty:
        raise EmptyRecordsError(f"{path} has a header but no records")
    df = df.astype(object).where(df.notna(), None)
    return [EvalRecord.model_validate(row) for row in df.to_dict(orient="records")]


def summarize_metric(values: Sequence[float]) -> MetricSummary:
    """Median, quartiles, mean and whiskers at the furthest points within 1.5 IQR of the quartiles."""
    s = pd.Series(values, dtype=float).dropna()
    if s.empty:
        raise EmptyRecordsError("no values to summarize")
    q1, median, q3 = (float(v) for v in s.quantile([0.25, 0.5, 0.75]))
    iqr = q3 - q1
    inside_lo = s[s >= q1 - WHISKER_IQR * iqr]
    inside_hi = s[s <= q3 + WHISKER_IQR * iqr]
    return MetricSummary(
        median=median,
        q1=q1,
        q3=q3,
        whisker_lo=float(inside_lo.min()),
        whisker_hi=float(inside_hi.max()),
        mean=float(s.mean()),
        count=int(s.size),
    )


def bin_edges(bin_width: float = DEFAULT_BIN_WIDTH, bin_max: float = DEFAULT_BIN_MAX) -> List[tuple[float, Optional[float]]]:
    """Closed-width bins from 0 up to bin_max, then one open bin."""
    if bin_width <= 0 or bin_max <= 0:
        raise ValueError("bin width and range must be positive")
    count = int(math.ceil(bin_max / bin_width - 1e-9))
    edges = [(k * bin_width, min((k + 1) * bin_width, bin_max)) for k in range(count)]
    return edges + [(bin_max, None)]


def awb_curves(
    df: pd.DataFrame,
    bin_width: float = DEFAULT_BIN_WIDTH,
    bin_max: float = DEFAULT_BIN_MAX,
) -> List[CurveBin]:
    """Mean metrics per strategy within each AWB-distance bin."""
    curves = []
    strategies = [s for s in StrategyId if s.value in set(df["strategy"])]
    distance = df["awb_distance_deg"].astype(float)
    for lo, hi in bin_edges(bin_width, bin_max):
        in_bin = (distance >= lo) if hi is None else (distance >= lo) & (distance < hi)
        for strategy in strategies:
            sub = df[in_bin & (df["strategy"] == strategy.value)]
            means = {}
            for metric in METRIC_NAMES:
                col = sub[metric].dropna().astype(float)
                means[metric] = float(col.mean()) if len(col) else None
            curves.append(CurveBin(bin_lo=lo, bin_hi=hi, strategy=strategy, count=len(sub), **means))
    return curves


def aggregate(
    records: Sequence[EvalRecord],
    bin_width: float = DEFAULT_BIN_WIDTH,
    bin_max: float = DEFAULT_BIN_MAX,
    metadata: Optional[Dict[str, object]] = None,
) -> AggregateReport:
    """Reduce records to per-strategy distributions and curves; failed records are only counted."""
    if not records:
        raise EmptyRecordsError("no evaluation records")
    ok = [r for r in records if not r.failed]
    df = records_frame(ok)
    strategies = {}
    for strategy in StrategyId:
        sub = df[df["strategy"] == strategy.value]
        if sub.empty:
            continue
        strategies[strategy] = {
            metric: summarize_metric(sub[metric].astype(float))
            for metric in METRIC_NAMES
            if sub[metric].notna().any()
        }
    meta = dict(metadata or {})
    meta["failure_count"] = len(records) - len(ok)
    return AggregateReport(
        strategies=strategies,
        curves=awb_curves(df, bin_width, bin_max) if ok else [],
        record_count=len(ok),
        failure_count=len(records) - len(ok),
        metadata=meta,
    )


def curves_frame(curves: Iterable[CurveBin]) -> pd.DataFrame:
    return pd.DataFrame([c.model_dump(mode="json") for c in curves], columns=list(CurveBin.model_fields))


def write_report(report: AggregateReport, out_dir: PathLike) -> tuple[Path, Path]:
    """aggregate.json and curves.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    agg = out_dir / "aggregate.json"
    agg.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    curves = out_dir / "curves.csv"
    curves_frame(report.curves).to_csv(curves, index=False)
    return agg, curves


def trend_slope(curves: Sequence[CurveBin], strategy: StrategyId, metric: str = "rgb_angular_deg") -> float:
    """Least-squares slope of a strategy's mean metric against the bin centers of its closed, non-empty bins."""
    points = [
        ((c.bin_lo + c.bin_hi) / 2.0, getattr(c, metric))
        for c in curves
        if c.strategy == strategy and c.bin_hi is not None and c.count > 0 and getattr(c, metric) is not None
    ]
    if len(points) < 2:
        raise EmptyRecordsError(f"{strategy.value}: fewer than two populated bins")
    x, y = np.array(points).T
    return float(np.polyfit(x, y, 1)[0])
