#!/usr/bin/env python3

"""
Immutable regression dataset and splitting.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigurationError, NumericError, ShapeError
from ..seeding import STREAM_SPLIT, make_rng

logger = logging.getLogger(__name__)


def _frozen(array, dtype=np.float64):
    array = np.array(array, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class FeatureStats:
    """Per-column mean and standard deviation used to standardize inputs."""
    mean: np.ndarray
    std: np.ndarray

    def transform(self, inputs):
        return (np.asarray(inputs, dtype=np.float64) - self.mean) / self.std

    def inverse(self, inputs):
        return np.asarray(inputs, dtype=np.float64) * self.std + self.mean


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Ordered (input vector, scalar target) samples.

    ``indices`` are stable sample ids: subsets and splits keep the ids of the
    parent dataset, which is what residual caches are keyed by. ``signal``
    and ``noise_sigma`` are only present for synthetic data.
    """
    inputs: np.ndarray
    targets: np.ndarray
    indices: Optional[np.ndarray] = None
    split: str = "all"
    signal: Optional[np.ndarray] = None
    noise_sigma: Optional[np.ndarray] = None
    columns: Tuple[str, ...] = ()
    target_column: str = "y"
    feature_stats: Optional[FeatureStats] = field(default=None, repr=False)

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=np.float64)
        if inputs.ndim == 1:
            inputs = inputs.reshape(-1, 1)
        if inputs.ndim != 2:
            raise ShapeError(f"inputs must be a 2-d array, got shape {inputs.shape}")
        targets = np.asarray(self.targets, dtype=np.float64).reshape(-1)
        n = inputs.shape[0]
        if targets.shape[0] != n:
            raise ShapeError(f"{n} inputs but {targets.shape[0]} targets")
        if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(targets))):
            raise NumericError("dataset values must be finite")
        indices = np.arange(n) if self.indices is None else np.asarray(self.indices)
        if indices.shape != (n,):
            raise ShapeError(f"expected {n} indices, got shape {indices.shape}")
        if len(np.unique(indices)) != n:
            raise ConfigurationError("dataset indices must be unique")
        object.__setattr__(self, "inputs", _frozen(inputs))
        object.__setattr__(self, "targets", _frozen(targets))
        object.__setattr__(self, "indices", _frozen(indices, dtype=np.int64))
        for name in ("signal", "noise_sigma"):
            value = getattr(self, name)
            if value is not None:
                value = np.asarray(value, dtype=np.float64).reshape(-1)
                if value.shape != (n,):
                    raise ShapeError(f"{name} must have {n} entries, got {value.shape[0]}")
                object.__setattr__(self, name, _frozen(value))
        if not self.columns:
            object.__setattr__(self, "columns", tuple(f"x{j}" for j in range(inputs.shape[1])))

    def __len__(self):
        return self.targets.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def is_synthetic(self) -> bool:
        return self.signal is not None

    @property
    def noise(self):
        """Realized noise ``y - f(x)``, synthetic data only."""
        if self.signal is None:
            return None
        return self.targets - self.signal

    @property
    def certainty_target(self):
        """``-log|n(x)|`` for diagnostics; never used for training."""
        noise = self.noise
        if noise is None:
            return None
        with np.errstate(divide="ignore"):
            return -np.log(np.abs(noise))

    def subset(self, positions, split: str = None) -> "Dataset":
        """
        :param positions: row positions (not sample ids) to keep, in order
        :param split: split tag of the result, defaults to this dataset's tag
        """
        positions = np.asarray(positions, dtype=np.int64)
        return replace(
            self,
            inputs=self.inputs[positions],
            targets=self.targets[positions],
            indices=self.indices[positions],
            split=self.split if split is None else split,
            signal=None if self.signal is None else self.signal[positions],
            noise_sigma=None if self.noise_sigma is None else self.noise_sigma[positions],
        )

    def concat(self, *others: "Dataset", split: str = None) -> "Dataset":
        parts = (self, *others)
        synthetic = all(p.is_synthetic for p in parts)
        return replace(
            self,
            inputs=np.vstack([p.inputs for p in parts]),
            targets=np.concatenate([p.targets for p in parts]),
            indices=np.concatenate([p.indices for p in parts]),
            split=self.split if split is None else split,
            signal=np.concatenate([p.signal for p in parts]) if synthetic else None,
            noise_sigma=np.concatenate([p.noise_sigma for p in parts]) if synthetic else None,
        )

    def positions_of(self, sample_ids) -> np.ndarray:
        """Row positions of the given sample ids."""
        lookup = {int(i): p for p, i in enumerate(self.indices)}
        return np.array([lookup[int(i)] for i in sample_ids], dtype=np.int64)


SPLIT_NAMES = ("train", "val", "test")


def _split_sizes(n: int, fractions: Sequence[float]):
    raw = np.array(fractions, dtype=np.float64) * n
    sizes = np.floor(raw + 1e-9).astype(np.int64)
    leftover = n - int(sizes.sum())
    # largest remainder, ties to the earlier split
    order = sorted(range(len(sizes)), key=lambda k: (-(raw[k] - sizes[k]), k))
    for k in order[:leftover]:
        sizes[k] += 1
    return [int(s) for s in sizes]


def split(data: Dataset, fractions=(0.8, 0.1, 0.1), seed: int = 0):
    """
    Random disjoint train/validation/test split.

    :param data: dataset to split
    :param fractions: positive (train, val, test) fractions summing to 1
    :param seed: split seed
    :return: ``(train, val, test)``; val may be empty, train and test may not
    :rtype: tuple
    """
    if len(fractions) != 3:
        raise ConfigurationError(f"expected three fractions, got {len(fractions)}")
    if any((not math.isfinite(f)) or f <= 0 for f in fractions):
        raise ConfigurationError(f"split fractions must be positive, got {tuple(fractions)}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigurationError(f"split fractions must sum to 1, got {sum(fractions)}")
    return split_counts(data, _split_sizes(len(data), fractions), seed)


def split_counts(data: Dataset, counts, seed: int = 0):
    """
    Random disjoint split into fixed sizes ``(n_train, n_val, n_test)``.
    """
    counts = [int(c) for c in counts]
    if len(counts) != 3 or any(c < 0 for c in counts) or sum(counts) != len(data):
        raise ConfigurationError(f"split sizes {counts} do not partition {len(data)} samples")
    for name, count in zip(SPLIT_NAMES, counts):
        if count == 0 and name != "val":
            raise ConfigurationError(f"split '{name}' would be empty")
    permutation = make_rng(seed, STREAM_SPLIT).permutation(len(data))
    bounds = np.cumsum([0] + counts)
    parts = tuple(
        data.subset(np.sort(permutation[bounds[k]:bounds[k + 1]]), split=name)
        for k, name in enumerate(SPLIT_NAMES)
    )
    logger.debug("split %d samples into %s", len(data), counts)
    return parts
