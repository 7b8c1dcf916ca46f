#!/usr/bin/env python3

import math

import pytest

from src.config import OUTPUT_ROOT_ENV, coerce, default_output_root, read_config_file
from src.errors import ConfigurationError, ParseError
from src.evaluators import ConfigEval
from src.experiment import CONFIG_KINDS, ExperimentConfig

VALUES = [
    ("1/50", "float", 0.02),
    ("log(4)", "float", math.log(4)),
    ("2.5e-3", "float", 0.0025),
    ("1e3", "int", 1000),
    ("2**7", "int", 128),
    ("32, 64, 2*64", "ints", (32, 64, 128)),
    ("0.8, 0.1, 0.1", "floats", (0.8, 0.1, 0.1)),
    ("7", "floats", (7.0,)),
]
IDS = [text for text, _, _ in VALUES]


class TestConfigEval:
    """
    Safe evaluation of numeric config values.
    """

    @pytest.mark.parametrize("text, kind, expected", VALUES, ids=IDS)
    def test_values(self, text, kind, expected):
        value = ConfigEval()(text, kind=kind)
        assert value == pytest.approx(expected, rel=1e-15), f"'{text}' evaluated to {value}"
        assert type(value) is type(expected)

    def test_symbol_table(self):
        evaluator = ConfigEval({"n_train": 128})
        assert evaluator.evaluate("n_train // 4", kind="int") == 32
        assert evaluator.free_symbols("n_train * scale + 1e-3") == {"scale"}

    @pytest.mark.parametrize("text, kind", [
        ("unknown + 1", "float"), ("1.5", "int"), ("'text'", "float"), ("1, 2", "float"),
        ("__import__('os')", "float"), ("1 +", "float"),
    ], ids=["unknown name", "fraction as int", "string", "tuple as scalar", "import", "syntax"])
    def test_rejected(self, text, kind):
        with pytest.raises(ParseError):
            ConfigEval().evaluate(text, kind=kind, key="lam")

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            ConfigEval().evaluate("1", kind="complex")


class TestConfigFile:
    """
    Flat key = value files and value coercion.
    """

    def test_read(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# simulation\nmethods = joint_laplace, separate_laplace\n\nlam = 1/50  # per delta\n"
                        "n-train = 128\nlam = 0.1\n")
        assert read_config_file(path) == {"methods": "joint_laplace, separate_laplace", "lam": "0.1",
                                          "n_train": "128"}

    def test_malformed(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("epochs = 10\njust words\n")
        with pytest.raises(ParseError) as info:
            read_config_file(path)
        assert info.value.row == 2
        with pytest.raises(ParseError):
            read_config_file(tmp_path / "missing.cfg")

    def test_coerce(self):
        assert coerce("none", "float?") is None
        assert coerce("0.5", "float?") == 0.5
        assert coerce(" a, b ,c ", "strs") == ("a", "b", "c")
        assert coerce("Yes", "bool") is True and coerce("off", "bool") is False
        with pytest.raises(ParseError):
            coerce("maybe", "bool", key="normalize")

    def test_output_root(self, monkeypatch):
        monkeypatch.delenv(OUTPUT_ROOT_ENV, raising=False)
        assert default_output_root() == "runs"
        monkeypatch.setenv(OUTPUT_ROOT_ENV, "/tmp/elsewhere")
        assert default_output_root() == "/tmp/elsewhere"


class TestExperimentConfig:
    """
    Experiment configuration from mappings and its validation.
    """

    def test_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.layer_sizes(1) == [1, 32, 64, 128, 128, 64, 32, 16, 2]
        assert cfg.seeds() == [0, 1, 2, 3, 4]
        assert set(CONFIG_KINDS) == set(cfg.to_dict())

    def test_from_mapping(self):
        cfg = ExperimentConfig.from_mapping({"delta": "5", "lam": "1/50", "hidden": "16, 16", "linear-tail": "1",
                                             "methods": "joint_laplace", "patience": "none", "epochs": "2*10"})
        assert (cfg.delta, cfg.lam, cfg.hidden, cfg.linear_tail) == (5.0, 0.02, (16, 16), 1)
        assert cfg.methods == ("joint_laplace",) and cfg.patience is None and cfg.epochs == 20
        override = ExperimentConfig.from_mapping({"epochs": "3"}, base=cfg)
        assert (override.epochs, override.delta) == (3, 5.0)

    @pytest.mark.parametrize("delta, lam, expected", [(0.0, None, 0.1), (1.0, None, 0.02), (5.0, None, 0.1),
                                                     (2.0, None, 0.1), (1.0, 0.3, 0.3)])
    def test_resolved_lambda(self, delta, lam, expected):
        assert ExperimentConfig(delta=delta, lam=lam).resolved_lambda == expected

    def test_fold_overrides(self):
        cfg = ExperimentConfig(epochs=50, fold_epochs=7, fold_learning_rate=0.01)
        assert cfg.train_config(3).epochs == 50
        fold = cfg.fold_train_config(3)
        assert (fold.epochs, fold.learning_rate, fold.seed) == (7, 0.01, 3)

    @pytest.mark.parametrize("kwargs", [
        {"methods": ()}, {"methods": ("joint_laplace", "joint_laplace")}, {"methods": ("mse",)},
        {"repeats": 0}, {"task": "images"}, {"task": "csv"}, {"delta": float('nan')}, {"m": 1},
        {"hidden": (16, 0)}, {"linear_tail": 0}, {"epochs": 0}, {"lam": -1.0}, {"clamp_c": 0.0},
        {"repeats": 2, "cache_path": "cache.csv"},
    ], ids=["no methods", "duplicate", "unknown method", "repeats", "task", "csv without path", "delta",
            "folds", "hidden", "linear tail", "epochs", "lambda", "clamp", "cache path"])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            ExperimentConfig(**kwargs)

    def test_unknown_setting(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_mapping({"learning-rte": "0.1"})
