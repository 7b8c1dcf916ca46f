#!/usr/bin/env python3

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from ..seeding import STREAM_FOLDS, make_rng


@dataclass(frozen=True, eq=False)
class FoldPlan:
    """
    Balanced random partition of dataset positions ``0..n-1`` into ``m`` folds.
    ``assignment[p]`` is the fold of position ``p``.
    """
    m: int
    assignment: np.ndarray
    seed: int

    @property
    def n(self) -> int:
        return self.assignment.shape[0]

    def members(self, fold: int) -> np.ndarray:
        """Positions assigned to ``fold``, ascending."""
        return np.flatnonzero(self.assignment == fold)

    def fold_sizes(self):
        return np.bincount(self.assignment, minlength=self.m).tolist()

    def __eq__(self, other):
        if not isinstance(other, FoldPlan):
            return NotImplemented
        return self.m == other.m and self.seed == other.seed and np.array_equal(self.assignment, other.assignment)


def make_fold_plan(n: int, m: int, seed: int) -> FoldPlan:
    """
    Shuffle the positions and deal them into ``m`` consecutive blocks; the
    first ``n mod m`` folds get one extra sample.

    :param n: dataset size
    :param m: fold count, ``2 <= m <= n``
    :param seed: plan seed
    :rtype: FoldPlan
    """
    n, m = int(n), int(m)
    if m < 2:
        raise ConfigurationError(f"need at least 2 folds, got {m}")
    if m > n:
        raise ConfigurationError(f"cannot split {n} samples into {m} non-empty folds")
    permutation = make_rng(seed, STREAM_FOLDS).permutation(n)
    base, extra = divmod(n, m)
    sizes = [base + (1 if j < extra else 0) for j in range(m)]
    assignment = np.empty(n, dtype=np.int64)
    assignment[permutation] = np.repeat(np.arange(m), sizes)
    assignment.setflags(write=False)
    return FoldPlan(m=m, assignment=assignment, seed=seed)
