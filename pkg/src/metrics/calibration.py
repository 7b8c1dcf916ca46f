#!/usr/bin/env python3

"""
Signal and error-estimate quality metrics.

A pair ``(r, e_hat)`` holds the actual absolute residual of a prediction and
the error the model predicted for it. eRMSE is the RMS gap between the two;
PiR(eta) is the fraction of pairs with ``eta * e_hat <= r < e_hat / eta``.
"""

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..errors import InputError, OutputError

DEFAULT_ETA_GRID = (1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1)


class EvalPair(NamedTuple):
    r: float
    e_hat: float


class EvalPairs:
    """Validated array-backed collection of ``EvalPair``."""

    def __init__(self, r, e_hat):
        r = np.array(r, dtype=np.float64).reshape(-1)
        e_hat = np.array(e_hat, dtype=np.float64).reshape(-1)
        if r.shape != e_hat.shape:
            raise InputError(f"{r.shape[0]} residuals but {e_hat.shape[0]} error estimates")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(e_hat))):
            raise InputError("pairs must be finite")
        if np.any(r < 0):
            raise InputError("residuals must be >= 0")
        if np.any(e_hat <= 0):
            raise InputError("error estimates must be > 0")
        r.setflags(write=False)
        e_hat.setflags(write=False)
        self.r = r
        self.e_hat = e_hat

    def __len__(self):
        return self.r.shape[0]

    def __iter__(self):
        return (EvalPair(float(a), float(b)) for a, b in zip(self.r, self.e_hat))

    def scaled(self, k: float) -> "EvalPairs":
        return EvalPairs(self.r * k, self.e_hat * k)


def make_pairs(r, e_hat) -> EvalPairs:
    return EvalPairs(r, e_hat)


def as_pairs(pairs) -> EvalPairs:
    if isinstance(pairs, EvalPairs):
        return pairs
    pairs = list(pairs)
    if not pairs:
        return EvalPairs([], [])
    r, e_hat = zip(*pairs)
    return EvalPairs(r, e_hat)


def _check_non_empty(pairs: EvalPairs):
    if len(pairs) == 0:
        raise InputError("metric needs at least one pair")


def _check_eta(eta: float):
    if not (0 < eta <= 1):
        raise InputError(f"eta must lie in (0, 1], got {eta}")


def rmse(predictions, targets) -> float:
    predictions = np.asarray(predictions, dtype=np.float64).reshape(-1)
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    if predictions.shape != targets.shape:
        raise InputError(f"{predictions.shape[0]} predictions but {targets.shape[0]} targets")
    if predictions.shape[0] == 0:
        raise InputError("rmse needs at least one prediction")
    return float(np.sqrt(np.mean((predictions - targets) ** 2)))


def ermse(pairs) -> float:
    """``sqrt(mean((e_hat - r)^2))``"""
    pairs = as_pairs(pairs)
    _check_non_empty(pairs)
    return float(np.sqrt(np.mean((pairs.e_hat - pairs.r) ** 2)))


def in_band(pairs, eta: float) -> np.ndarray:
    """Boolean mask of pairs with ``eta * e_hat <= r < e_hat / eta``."""
    pairs = as_pairs(pairs)
    _check_eta(eta)
    return (eta * pairs.e_hat <= pairs.r) & (pairs.r < pairs.e_hat / eta)


def pir(pairs, eta: float) -> float:
    pairs = as_pairs(pairs)
    _check_non_empty(pairs)
    return float(np.count_nonzero(in_band(pairs, eta)) / len(pairs))


def pir_curve(pairs, grid: Sequence[float] = DEFAULT_ETA_GRID) -> List[Tuple[float, float]]:
    pairs = as_pairs(pairs)
    _check_non_empty(pairs)
    for eta in grid:
        _check_eta(eta)
    return [(float(eta), pir(pairs, eta)) for eta in grid]


@dataclass
class MetricsReport:
    """
    Test-split metrics for one trained model. Uncertainty fields are ``None``
    for models without a certainty head.
    """
    rmse: float
    n: int
    ermse: Optional[float] = None
    pir_curve: Optional[List[Tuple[float, float]]] = None
    mean_residual: Optional[float] = None
    mean_error_estimate: Optional[float] = None
    pairs: Optional[EvalPairs] = None

    def pir_at(self, eta: float) -> Optional[float]:
        if self.pir_curve is None:
            return None
        for grid_eta, value in self.pir_curve:
            if math.isclose(grid_eta, eta):
                return value
        raise InputError(f"eta {eta} is not on the reported grid")

    def to_dict(self) -> dict:
        return {
            "rmse": self.rmse,
            "ermse": self.ermse,
            "pir_curve": None if self.pir_curve is None else [list(p) for p in self.pir_curve],
            "n": self.n,
            "mean_residual": self.mean_residual,
            "mean_error_estimate": self.mean_error_estimate,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MetricsReport":
        curve = payload.get("pir_curve")
        return cls(
            rmse=payload["rmse"],
            n=payload["n"],
            ermse=payload.get("ermse"),
            pir_curve=None if curve is None else [tuple(p) for p in curve],
            mean_residual=payload.get("mean_residual"),
            mean_error_estimate=payload.get("mean_error_estimate"),
        )


def evaluate(y, y_star, e_hat=None, grid: Sequence[float] = DEFAULT_ETA_GRID,
             keep_pairs: bool = True) -> MetricsReport:
    """
    :param y: signal predictions
    :param y_star: targets
    :param e_hat: predicted absolute errors, or ``None`` for signal-only models
    :param grid: eta values for the PiR curve
    :param keep_pairs: attach the raw pairs to the report
    :rtype: MetricsReport
    """
    y = np.asarray(y, dtype=np.float64)
    y_star = np.asarray(y_star, dtype=np.float64)
    report = MetricsReport(rmse=rmse(y, y_star), n=int(y.shape[0]))
    r = np.abs(y - y_star)
    report.mean_residual = float(r.mean())
    if e_hat is None:
        return report
    pairs = EvalPairs(r, e_hat)
    report.ermse = ermse(pairs)
    report.pir_curve = pir_curve(pairs, grid)
    report.mean_error_estimate = float(pairs.e_hat.mean())
    if keep_pairs:
        report.pairs = pairs
    return report


def grouped_report(groups: Mapping[object, object], grid: Sequence[float] = DEFAULT_ETA_GRID) -> dict:
    """
    Average per-group eRMSE and PiR over groups, e.g. one group per image.

    :param groups: group key to pair set
    :return: ``{"ermse": float, "pir_curve": [(eta, value), ...], "groups": int}``
    """
    if not groups:
        raise InputError("grouped_report needs at least one group")
    per_group = [as_pairs(pairs) for pairs in groups.values()]
    errors = [ermse(pairs) for pairs in per_group]
    curves = np.array([[value for _, value in pir_curve(pairs, grid)] for pairs in per_group])
    return {
        "ermse": float(np.mean(errors)),
        "pir_curve": [(float(eta), float(v)) for eta, v in zip(grid, curves.mean(axis=0))],
        "groups": len(per_group),
    }


def write_pairs_csv(pairs, path) -> Path:
    """Two-column CSV ``r,e_hat`` for external scatter and PiR plots."""
    pairs = as_pairs(pairs)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as csvfile:
            writer = csv.writer(csvfile)
            writer.writerow(["r", "e_hat"])
            for r, e_hat in zip(pairs.r, pairs.e_hat):
                writer.writerow([repr(float(r)), repr(float(e_hat))])
    except OSError as err:
        raise OutputError(f"cannot write {path}: {err}") from err
    return path
