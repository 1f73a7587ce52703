"""Trend check of the white-balance wrap on a generated synthetic dataset.

Runs Baseline and WbTest with the tint-blind estimator and checks that the
Baseline error grows with the distance to the AWB rendition while WbTest stays
flat and below it.
"""

from eval.run_eval import check_trend, run_trend_eval

__all__ = ["check_trend", "run_trend_eval"]
