#!/usr/bin/env python3

from .calibration import (
    EvalPair, EvalPairs, MetricsReport, DEFAULT_ETA_GRID,
    make_pairs, as_pairs, rmse, ermse, in_band, pir, pir_curve,
    evaluate, grouped_report, write_pairs_csv,
)
