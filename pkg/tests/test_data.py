#!/usr/bin/env python3

import math

import numpy as np
import pytest

from src.data import (
    Dataset, SyntheticConfig, NOISE_FAMILIES, generate_synthetic, ideal_mean_error, signal, noise_sigma,
    load_csv, write_columns_csv, write_csv, split, split_counts,
)
from src.errors import ConfigurationError, NumericError, ParseError, ShapeError

TABULAR = 'data/tabular_small.csv'
PUBLIC = 'data/mtcars.csv'


class TestSynthetic:
    """
    The heteroscedastic step-function task.
    """

    @pytest.mark.parametrize("x, delta, expected", [
        (0.25, 5.0, -0.5), (0.75, 5.0, 5.5), (0.5, 1.0, 1.0), (0.4999, 1.0, -0.0002), (0.0, 0.0, -1.0),
    ], ids=["below step", "above step", "at step", "just below", "origin"])
    def test_signal(self, x, delta, expected):
        assert signal(x, delta) == pytest.approx(expected, abs=1e-12)

    def test_noise_sigma(self):
        np.testing.assert_allclose(noise_sigma([0.0, 0.5, 1.0]), [0.01, 1.005, 2.0])

    def test_generated_sample(self):
        data = generate_synthetic(SyntheticConfig(n=628, delta=5.0, seed=3))
        assert len(data) == 628 and data.dim == 1 and data.is_synthetic
        assert np.all((data.inputs >= 0) & (data.inputs < 1))
        np.testing.assert_allclose(data.signal, signal(data.inputs[:, 0], 5.0))
        np.testing.assert_allclose(data.noise, data.targets - data.signal)
        np.testing.assert_allclose(data.certainty_target, -np.log(np.abs(data.noise)))

    def test_deterministic(self):
        a = generate_synthetic(SyntheticConfig(n=50, seed=7))
        b = generate_synthetic(SyntheticConfig(n=50, seed=7))
        c = generate_synthetic(SyntheticConfig(n=50, seed=8))
        np.testing.assert_array_equal(a.targets, b.targets)
        assert not np.array_equal(a.targets, c.targets)

    @pytest.mark.parametrize("family", sorted(NOISE_FAMILIES))
    def test_noise_moments(self, family):
        data = generate_synthetic(SyntheticConfig(n=10_000, seed=1, noise_family=family))
        standardized = data.noise / data.noise_sigma
        assert abs(standardized.mean()) < 0.05
        assert abs(standardized.std() - 1.0) < 0.05

    @pytest.mark.parametrize("family, factor", [("gaussian", math.sqrt(2 / math.pi)), ("laplace", 1 / math.sqrt(2))])
    def test_ideal_mean_error(self, family, factor):
        np.testing.assert_allclose(ideal_mean_error([0.01, 1.0, 2.0], family), [0.01 * factor, factor, 2 * factor])
        data = generate_synthetic(SyntheticConfig(n=10_000, seed=5, noise_family=family))
        ideal = ideal_mean_error(data.noise_sigma, family)
        assert np.mean(np.abs(data.noise) / ideal) == pytest.approx(1.0, abs=0.03)
        with pytest.raises(ConfigurationError):
            ideal_mean_error(1.0, "cauchy")

    def test_noise_floor(self):
        """Expected squared noise over x ~ U[0, 1) matches the closed-form integral."""
        data = generate_synthetic(SyntheticConfig(n=10_000, seed=2))
        floor = math.sqrt(1.99 ** 2 / 3 + 1.99 * 0.01 + 0.01 ** 2)
        assert floor == pytest.approx(1.16, abs=0.005)
        assert math.sqrt(np.mean(data.noise ** 2)) == pytest.approx(floor, rel=0.05)

    @pytest.mark.parametrize("kwargs", [{"n": 0}, {"delta": float('inf')}, {"noise_family": "cauchy"}],
                             ids=["n", "delta", "family"])
    def test_invalid_config(self, kwargs):
        with pytest.raises(ConfigurationError):
            SyntheticConfig(**kwargs)


class TestDataset:
    """
    Dataset validation and subsets.
    """

    def test_validation(self):
        with pytest.raises(ShapeError):
            Dataset(np.zeros((3, 2)), np.zeros(4))
        with pytest.raises(NumericError):
            Dataset([0.0, np.nan], [1.0, 2.0])
        with pytest.raises(ConfigurationError):
            Dataset([0.0, 1.0], [1.0, 2.0], indices=[4, 4])

    def test_read_only(self):
        data = Dataset([0.0, 1.0], [1.0, 2.0])
        with pytest.raises(ValueError):
            data.targets[0] = 5.0

    def test_subset_keeps_ids(self):
        data = Dataset(np.arange(6.0), np.arange(6.0) * 2, indices=[10, 11, 12, 13, 14, 15])
        part = data.subset([4, 1], split="train")
        assert part.split == "train"
        np.testing.assert_array_equal(part.indices, [14, 11])
        np.testing.assert_array_equal(part.targets, [8.0, 2.0])
        np.testing.assert_array_equal(data.positions_of([14, 11]), [4, 1])
        joined = part.concat(data.subset([0]))
        np.testing.assert_array_equal(joined.indices, [14, 11, 10])


class TestSplits:
    """
    Random disjoint train/validation/test splits.
    """

    def test_sizes(self):
        data = Dataset(np.arange(100.0), np.zeros(100))
        train, val, test = split(data, (0.8, 0.1, 0.1), seed=0)
        assert (len(train), len(val), len(test)) == (80, 10, 10)
        ids = np.concatenate([train.indices, val.indices, test.indices])
        assert sorted(ids.tolist()) == list(range(100))
        assert (train.split, val.split, test.split) == ("train", "val", "test")

    def test_largest_remainder(self):
        data = Dataset(np.arange(7.0), np.zeros(7))
        assert [len(part) for part in split(data, (0.5, 0.25, 0.25), seed=0)] == [3, 2, 2]

    def test_deterministic(self):
        data = Dataset(np.arange(50.0), np.zeros(50))
        a, b = split(data, seed=5), split(data, seed=5)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.indices, y.indices)

    @pytest.mark.parametrize("fractions", [(0.8, 0.1), (0.8, 0.05, 0.05), (1.0, 0.0, 0.0), (0.9, -0.1, 0.2)],
                             ids=["two", "sum 0.9", "empty test", "negative"])
    def test_invalid_fractions(self, fractions):
        with pytest.raises(ConfigurationError):
            split(Dataset(np.arange(20.0), np.zeros(20)), fractions)

    def test_counts(self):
        data = generate_synthetic(SyntheticConfig(n=628, seed=0))
        train, val, test = split_counts(data, (128, 0, 500), seed=0)
        assert (len(train), len(val), len(test)) == (128, 0, 500)
        with pytest.raises(ConfigurationError):
            split_counts(data, (128, 0, 400), seed=0)
        with pytest.raises(ConfigurationError):
            split_counts(data, (0, 128, 500), seed=0)


class TestTabular:
    """
    CSV loading and export.
    """

    def test_load(self):
        data = load_csv(TABULAR, None, "y")
        assert len(data) == 80 and data.columns == ("x1", "x2", "x3")
        np.testing.assert_array_equal(data.indices, np.arange(80))

    def test_normalize(self):
        data = load_csv(TABULAR, ["x1", "x3"], "y", normalize=True)
        np.testing.assert_allclose(data.inputs.mean(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(data.inputs.std(axis=0), 1.0, atol=1e-9)
        raw = load_csv(TABULAR, ["x1", "x3"], "y")
        np.testing.assert_allclose(data.feature_stats.inverse(data.inputs), raw.inputs, atol=1e-12)

    def test_missing_column(self):
        with pytest.raises(ParseError) as info:
            load_csv(TABULAR, None, "age")
        assert info.value.column == "age"
        with pytest.raises(ParseError) as info:
            load_csv(TABULAR, ["x1", "x9"], "y")
        assert info.value.column == "x9"

    def test_bad_cells(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,y\n1.0,2.0\n3.0,oops\n")
        with pytest.raises(ParseError) as info:
            load_csv(path, None, "y")
        assert (info.value.row, info.value.column) == (3, "y")
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        with pytest.raises(ParseError):
            load_csv(empty, None, "y")
        header_only = tmp_path / "header.csv"
        header_only.write_text("a,y\n")
        with pytest.raises(ParseError):
            load_csv(header_only, None, "y")

    def test_small_file(self, tmp_path):
        path = tmp_path / "three.csv"
        path.write_text("a,b,y\n1,2,3\n4,5,6\n7,8,9\n")
        data = load_csv(path, None, "y")
        np.testing.assert_array_equal(data.inputs, [[1, 2], [4, 5], [7, 8]])
        np.testing.assert_array_equal(data.targets, [3, 6, 9])

    def test_export(self, tmp_path):
        data = generate_synthetic(SyntheticConfig(n=40, delta=1.0, seed=4))
        _, _, test = split_counts(data, (20, 5, 15), seed=4)
        path = write_csv(test, tmp_path / "test.csv")
        header = path.read_text().splitlines()[0]
        assert header == "index,x,y,f,sigma"
        loaded = load_csv(path, ["x"], "y")
        np.testing.assert_array_equal(loaded.indices, test.indices)
        np.testing.assert_array_equal(loaded.inputs, test.inputs)
        np.testing.assert_array_equal(loaded.targets, test.targets)

    def test_columns_export(self, tmp_path):
        path = write_columns_csv({"index": np.array([4, 9]), "y_hat": np.array([0.1, 1 / 3])}, tmp_path / "p.csv")
        assert path.read_text().splitlines() == ["index,y_hat", "4,0.1", f"9,{1 / 3!r}"]
        with pytest.raises(ShapeError):
            write_columns_csv({"a": np.zeros(2), "b": np.zeros(3)}, tmp_path / "q.csv")

    def test_public_table(self):
        data = load_csv(PUBLIC, None, "mpg")
        assert len(data) == 32 and data.dim == 10
        assert data.columns[:2] == ("cyl", "disp")
        assert data.targets.min() == 10.4 and data.targets.max() == 33.9
