#!/usr/bin/env python3

"""
Out-of-fold residual cache and its text file format.

File layout: ``#``-prefixed ``key = value`` header lines, then a CSV table
``index,fold,r_tilde`` with one row per sample in dataset order.
"""

import csv
import hashlib
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from ..errors import CacheIntegrityError, CacheMissError, OutputError, StaleCacheWarning
from .fold_plan import FoldPlan

logger = logging.getLogger(__name__)

CACHE_FORMAT = "vireval-residuals/1"
TABLE_HEADER = ["index", "fold", "r_tilde"]


def config_fingerprint(train_cfg, layer_sizes, linear_tail: int) -> str:
    """SHA-256 of the fold-model training configuration and architecture."""
    payload = {
        "train": train_cfg.to_dict(),
        "layer_sizes": [int(s) for s in layer_sizes],
        "linear_tail": int(linear_tail),
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


@dataclass(frozen=True, eq=False)
class ResidualCache:
    """
    Virtual residual per training sample.

    Row ``p`` describes the sample at dataset position ``p``: its id
    ``indices[p]``, its fold ``folds[p]`` (equal to ``plan.assignment[p]``)
    and its residual ``r_tilde[p]`` as predicted by the model trained without
    that fold, whose checksum is ``checksums[folds[p]]``.
    """
    indices: np.ndarray
    folds: np.ndarray
    r_tilde: np.ndarray
    checksums: Tuple[str, ...]
    plan: FoldPlan
    fingerprint: str
    layer_sizes: Tuple[int, ...]
    linear_tail: int
    fold_logs: tuple = field(default=(), repr=False)

    def __post_init__(self):
        indices = np.asarray(self.indices, dtype=np.int64)
        folds = np.asarray(self.folds, dtype=np.int64)
        r_tilde = np.asarray(self.r_tilde, dtype=np.float64)
        n = self.plan.n
        if indices.shape != (n,) or folds.shape != (n,) or r_tilde.shape != (n,):
            raise CacheIntegrityError(f"cache must hold exactly {n} entries")
        if len(np.unique(indices)) != n:
            raise CacheIntegrityError("cache holds duplicate indices")
        if not np.array_equal(folds, self.plan.assignment):
            raise CacheIntegrityError("cache fold ids disagree with the fold plan")
        if not np.all(np.isfinite(r_tilde)):
            bad = int(indices[~np.isfinite(r_tilde)][0])
            raise CacheIntegrityError(f"non-finite virtual residual for index {bad}")
        if np.any(r_tilde < 0):
            bad = int(indices[r_tilde < 0][0])
            raise CacheIntegrityError(f"negative virtual residual for index {bad}")
        if len(self.checksums) != self.plan.m:
            raise CacheIntegrityError(f"expected {self.plan.m} fold checksums, got {len(self.checksums)}")
        for name, value in (("indices", indices), ("folds", folds), ("r_tilde", r_tilde)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "checksums", tuple(self.checksums))
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        object.__setattr__(self, "_position", {int(i): p for p, i in enumerate(indices)})

    def __len__(self):
        return self.indices.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ResidualCache):
            return NotImplemented
        return (np.array_equal(self.indices, other.indices)
                and np.array_equal(self.folds, other.folds)
                and np.array_equal(self.r_tilde, other.r_tilde)
                and self.checksums == other.checksums
                and self.plan == other.plan
                and self.fingerprint == other.fingerprint
                and self.layer_sizes == other.layer_sizes
                and self.linear_tail == other.linear_tail)

    def missing(self, indices):
        return [int(i) for i in indices if int(i) not in self._position]

    def lookup(self, indices) -> np.ndarray:
        """
        :param indices: sample ids
        :return: their virtual residuals
        :raises CacheMissError: when an id has no entry
        """
        try:
            return self.r_tilde[[self._position[int(i)] for i in indices]]
        except KeyError:
            raise CacheMissError(self.missing(indices)) from None

    def fold_of(self, index: int) -> int:
        return int(self.folds[self._position[int(index)]])


def save_cache(cache: ResidualCache, path) -> Path:
    path = Path(path)
    header = {
        "format": CACHE_FORMAT,
        "n": cache.plan.n,
        "m": cache.plan.m,
        "seed": cache.plan.seed,
        "fingerprint": cache.fingerprint,
        "architecture": ",".join(str(s) for s in cache.layer_sizes),
        "linear_tail": cache.linear_tail,
    }
    for fold, checksum in enumerate(cache.checksums):
        header[f"checksum.{fold}"] = checksum
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as handle:
            for key, value in header.items():
                handle.write(f"# {key} = {value}\n")
            writer = csv.writer(handle)
            writer.writerow(TABLE_HEADER)
            for index, fold, r in zip(cache.indices, cache.folds, cache.r_tilde):
                writer.writerow([int(index), int(fold), repr(float(r))])
    except OSError as err:
        raise OutputError(f"cannot write residual cache {path}: {err}") from err
    logger.info("saved %d virtual residuals to %s", len(cache), path)
    return path


def _read_header(lines):
    header = {}
    body = []
    for line in lines:
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if not sep:
                raise CacheIntegrityError(f"malformed header line: {line.strip()}")
            header[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    return header, body


def load_cache(path, expected_fingerprint: Optional[str] = None) -> ResidualCache:
    """
    Read and re-validate a residual cache.

    :param path: cache file written by ``save_cache``
    :param expected_fingerprint: fingerprint of the requesting experiment;
                                 a mismatch emits ``StaleCacheWarning``
    :raises CacheIntegrityError: missing, incomplete or corrupt file
    :rtype: ResidualCache
    """
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as err:
        raise CacheIntegrityError(f"cannot read residual cache {path}: {err}") from err
    header, body = _read_header(lines)
    if header.get("format") != CACHE_FORMAT:
        raise CacheIntegrityError(f"{path} is not a {CACHE_FORMAT} file")
    try:
        n, m, seed = int(header["n"]), int(header["m"]), int(header["seed"])
        layer_sizes = [int(s) for s in header["architecture"].split(",")]
        linear_tail = int(header["linear_tail"])
        fingerprint = header["fingerprint"]
        checksums = [header[f"checksum.{fold}"] for fold in range(m)]
    except (KeyError, ValueError) as err:
        raise CacheIntegrityError(f"{path}: bad or missing header field {err}") from err

    rows = list(csv.reader(body))
    if not rows or [cell.strip() for cell in rows[0]] != TABLE_HEADER:
        raise CacheIntegrityError(f"{path}: missing table header {','.join(TABLE_HEADER)}")
    rows = rows[1:]
    if len(rows) != n:
        raise CacheIntegrityError(f"{path}: header announces {n} entries, file holds {len(rows)}")
    try:
        indices = [int(row[0]) for row in rows]
        folds = [int(row[1]) for row in rows]
        r_tilde = [float(row[2]) for row in rows]
    except (IndexError, ValueError) as err:
        raise CacheIntegrityError(f"{path}: corrupt record: {err}") from err
    if any(math.isnan(r) for r in r_tilde):
        raise CacheIntegrityError(f"{path}: NaN virtual residual")
    if any(f < 0 or f >= m for f in folds):
        raise CacheIntegrityError(f"{path}: fold id outside [0, {m})")

    assignment = np.array(folds, dtype=np.int64)
    assignment.setflags(write=False)
    plan = FoldPlan(m=m, assignment=assignment, seed=seed)
    cache = ResidualCache(
        indices=indices, folds=folds, r_tilde=r_tilde, checksums=checksums, plan=plan,
        fingerprint=fingerprint, layer_sizes=layer_sizes, linear_tail=linear_tail,
    )
    if expected_fingerprint is not None and expected_fingerprint != fingerprint:
        message = f"residual cache {path} was built with a different fold configuration"
        logger.warning(message)
        warnings.warn(message, StaleCacheWarning, stacklevel=2)
    return cache
