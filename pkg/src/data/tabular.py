#!/usr/bin/env python3

"""
CSV input and output for datasets.
"""

import csv
import logging
import math
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from ..errors import OutputError, ParseError, ShapeError
from .dataset import Dataset, FeatureStats

logger = logging.getLogger(__name__)

INDEX_COLUMN = "index"


def _number(cell: str, row: int, column: str) -> float:
    try:
        value = float(cell)
    except (TypeError, ValueError):
        raise ParseError(f"non-numeric value '{cell}'", row=row, column=column) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value '{cell}'", row=row, column=column)
    return value


def load_csv(path, input_cols: Optional[Sequence[str]], target_col: str, normalize: bool = False) -> Dataset:
    """
    Read a comma-separated file with a header row.

    :param path: CSV file
    :param input_cols: input column names; ``None`` takes every column except the
                       target and an ``index`` column
    :param target_col: target column name
    :param normalize: standardize each input column to mean 0, unit variance
    :return: dataset; indices come from an ``index`` column when present,
             otherwise they are the data row numbers starting at 0
    :rtype: Dataset
    """
    path = Path(path)
    try:
        with open(path, newline="") as csvfile:
            reader = csv.reader(csvfile)
            header = next(reader, None)
            if header is None:
                raise ParseError(f"{path} is empty", row=1)
            header = [h.strip() for h in header]
            if target_col not in header:
                raise ParseError(f"missing target column in {path}", row=1, column=target_col)
            if input_cols is None:
                input_cols = [h for h in header if h not in (target_col, INDEX_COLUMN)]
            input_cols = list(input_cols)
            if not input_cols:
                raise ParseError(f"no input columns in {path}", row=1)
            for name in input_cols:
                if name not in header:
                    raise ParseError(f"missing input column in {path}", row=1, column=name)
            positions = [header.index(name) for name in input_cols]
            target_position = header.index(target_col)
            index_position = header.index(INDEX_COLUMN) if INDEX_COLUMN in header else None

            inputs, targets, ids = [], [], []
            for row_number, row in enumerate(reader, start=2):
                if not row or all(not cell.strip() for cell in row):
                    continue
                if len(row) != len(header):
                    raise ParseError(f"expected {len(header)} cells, got {len(row)}", row=row_number)
                inputs.append([_number(row[p], row_number, header[p]) for p in positions])
                targets.append(_number(row[target_position], row_number, target_col))
                if index_position is not None:
                    ids.append(int(_number(row[index_position], row_number, INDEX_COLUMN)))
    except OSError as err:
        raise ParseError(f"cannot read {path}: {err}") from err

    if not targets:
        raise ParseError(f"{path} has no data rows", row=2)

    inputs = np.array(inputs, dtype=np.float64)
    stats = None
    if normalize:
        std = inputs.std(axis=0)
        # constant columns are only centred
        std[std == 0] = 1.0
        stats = FeatureStats(mean=inputs.mean(axis=0), std=std)
        inputs = stats.transform(inputs)
    logger.info("loaded %d rows with %d inputs from %s", len(targets), len(input_cols), path)
    return Dataset(
        inputs=inputs,
        targets=np.array(targets, dtype=np.float64),
        indices=ids or None,
        split="csv",
        columns=tuple(input_cols),
        target_column=target_col,
        feature_stats=stats,
    )


def write_csv(data: Dataset, path) -> Path:
    """
    Write a dataset in the schema ``load_csv`` reads. Synthetic datasets add
    ``f`` and ``sigma`` columns; an ``index`` column keeps the sample ids.
    """
    path = Path(path)
    header = [INDEX_COLUMN, *data.columns, data.target_column]
    if data.is_synthetic:
        header += ["f", "sigma"]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as csvfile:
            writer = csv.writer(csvfile)
            writer.writerow(header)
            for k in range(len(data)):
                row = [int(data.indices[k]), *(repr(float(v)) for v in data.inputs[k]), repr(float(data.targets[k]))]
                if data.is_synthetic:
                    row += [repr(float(data.signal[k])), repr(float(data.noise_sigma[k]))]
                writer.writerow(row)
    except OSError as err:
        raise OutputError(f"cannot write {path}: {err}") from err
    return path


def write_columns_csv(columns: Mapping[str, np.ndarray], path) -> Path:
    """
    Write equally long columns as CSV, header in mapping order. Integer
    columns are written as integers, everything else in round-trip float form.
    """
    path = Path(path)
    columns = {name: np.asarray(values).reshape(-1) for name, values in columns.items()}
    lengths = {values.shape[0] for values in columns.values()}
    if len(lengths) > 1:
        raise ShapeError(f"columns differ in length: {sorted(lengths)}")
    cells = [
        [str(int(v)) for v in values] if values.dtype.kind in "iu" else [repr(float(v)) for v in values]
        for values in columns.values()
    ]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as csvfile:
            writer = csv.writer(csvfile)
            writer.writerow(list(columns))
            writer.writerows(zip(*cells))
    except OSError as err:
        raise OutputError(f"cannot write {path}: {err}") from err
    return path
