#!/usr/bin/env python3

"""
Experiment runner: data, virtual residuals, training of every method on the
same splits and initial parameters, test-split metrics and reports.
"""

import json
import logging
import math
import platform
import time
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .config import coerce, default_output_root
from .data import (SyntheticConfig, generate_synthetic, ideal_mean_error, load_csv, split, split_counts,
                   write_columns_csv, write_csv)
from .errors import (CacheIntegrityError, CacheMissError, CheckFailedError, ConfigurationError,
                     NumericError, OutputError, ParseError)
from .evaluators import ConfigEval
from .folds import (compute_virtual_residuals, config_fingerprint, in_sample_residuals,
                    load_cache, make_fold_plan, save_cache, signal_layer_sizes)
from .losses import (JOINT_GAUSSIAN, JOINT_LAPLACE, L1_ONLY, SEPARATE_LAPLACE,
                     SEPARATE_NO_VR, VARIANTS, LossConfig, predicted_error)
from .metrics import DEFAULT_ETA_GRID, MetricsReport, evaluate, write_pairs_csv
from .netcore import (SIMULATION_LINEAR_TAIL, TrainConfig, forward_batch, init_model,
                      load_checkpoint, save_checkpoint, train)
from .netcore.mlp import SIMULATION_HIDDEN

logger = logging.getLogger(__name__)

TASKS = ("synthetic", "csv")
JOINT_VARIANTS = (JOINT_LAPLACE, JOINT_GAUSSIAN)

# certainty weight per step height; other heights and tabular tasks use the defaults below
DELTA_LAMBDA = {0.0: 0.1, 1.0: 0.02, 5.0: 0.1}
SIMULATION_DEFAULT_LAMBDA = 0.1
TABULAR_DEFAULT_LAMBDA = 0.02

# 8000 Adam steps on 128 samples; the default network fits the training noise by then
EXPERIMENT_EPOCHS = 1000
EXPERIMENT_BATCH_SIZE = 16
EXPERIMENT_LEARNING_RATE = 3e-3

METHOD_LABELS = {
    L1_ONLY: "L1",
    JOINT_GAUSSIAN: "JF (Gaussian)",
    JOINT_LAPLACE: "JF (Laplace)",
    SEPARATE_LAPLACE: "separate",
    SEPARATE_NO_VR: "separate, no VR",
}

CONFIG_KINDS = {
    "task": "str",
    "delta": "float",
    "noise_family": "str",
    "n_train": "int",
    "n_val": "int",
    "n_test": "int",
    "csv_path": "str?",
    "input_cols": "strs?",
    "target_col": "str",
    "normalize": "bool",
    "fractions": "floats",
    "methods": "strs",
    "lam": "float?",
    "clamp_c": "float",
    "m": "int",
    "hidden": "ints",
    "linear_tail": "int",
    "epochs": "int",
    "batch_size": "int",
    "learning_rate": "float",
    "optimizer": "str",
    "beta1": "float",
    "beta2": "float",
    "eps": "float",
    "momentum": "float",
    "patience": "int?",
    "fold_epochs": "int?",
    "fold_learning_rate": "float?",
    "repeats": "int",
    "seed": "int",
    "output_dir": "str?",
    "workers": "int",
    "cache_path": "str?",
    "allow_stale_cache": "bool",
    "diagnose_cache": "bool",
    "strict_checks": "bool",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Flat experiment description; every field can be set from a config file
    or a command line flag. ``lam = None`` picks the task's default weight.
    ``cache_path`` may contain ``{seed}``. With ``strict_checks`` a failed
    diagnostic check raises ``CheckFailedError`` once the report is written.
    """
    task: str = "synthetic"
    delta: float = 0.0
    noise_family: str = "gaussian"
    n_train: int = 128
    n_val: int = 0
    n_test: int = 500
    csv_path: Optional[str] = None
    input_cols: Optional[Tuple[str, ...]] = None
    target_col: str = "y"
    normalize: bool = True
    fractions: Tuple[float, ...] = (0.8, 0.1, 0.1)
    methods: Tuple[str, ...] = (L1_ONLY, JOINT_LAPLACE, SEPARATE_LAPLACE)
    lam: Optional[float] = None
    clamp_c: float = 1.0
    m: int = 10
    hidden: Tuple[int, ...] = SIMULATION_HIDDEN
    linear_tail: int = SIMULATION_LINEAR_TAIL
    epochs: int = EXPERIMENT_EPOCHS
    batch_size: int = EXPERIMENT_BATCH_SIZE
    learning_rate: float = EXPERIMENT_LEARNING_RATE
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    momentum: float = 0.0
    patience: Optional[int] = 10
    fold_epochs: Optional[int] = None
    fold_learning_rate: Optional[float] = None
    repeats: int = 5
    seed: int = 0
    output_dir: Optional[str] = None
    workers: int = 1
    cache_path: Optional[str] = None
    allow_stale_cache: bool = False
    diagnose_cache: bool = True
    strict_checks: bool = True

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "fractions", tuple(float(f) for f in self.fractions))
        if self.input_cols is not None:
            object.__setattr__(self, "input_cols", tuple(self.input_cols))
        if self.task not in TASKS:
            raise ConfigurationError(f"unknown task '{self.task}', expected one of {TASKS}")
        if not self.methods:
            raise ConfigurationError("at least one method is required")
        for method in self.methods:
            if method not in VARIANTS:
                raise ConfigurationError(f"unknown method '{method}', expected one of {VARIANTS}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigurationError(f"duplicate methods in {self.methods}")
        if int(self.repeats) < 1:
            raise ConfigurationError(f"repeats must be >= 1, got {self.repeats}")
        if int(self.workers) < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")
        if self.task == "csv" and not self.csv_path:
            raise ConfigurationError("task 'csv' needs csv_path")
        if self.task == "synthetic":
            if not math.isfinite(self.delta):
                raise ConfigurationError(f"delta must be finite, got {self.delta}")
            if self.n_train <= 0 or self.n_test <= 0 or self.n_val < 0:
                raise ConfigurationError("n_train and n_test must be positive, n_val non-negative")
        if any(h <= 0 for h in self.hidden):
            raise ConfigurationError(f"hidden widths must be positive, got {self.hidden}")
        if not 1 <= self.linear_tail <= len(self.hidden) + 1:
            raise ConfigurationError(f"linear_tail must be in [1, {len(self.hidden) + 1}], got {self.linear_tail}")
        if self.m < 2:
            raise ConfigurationError(f"need at least 2 folds, got {self.m}")
        if self.cache_path and self.repeats > 1 and "{seed}" not in self.cache_path:
            raise ConfigurationError("cache_path must contain '{seed}' when repeats > 1")
        # build once so invalid hyperparameters fail before any training
        self.train_config(self.seed)
        self.fold_train_config(self.seed)
        self.loss_config(self.methods[0])

    @classmethod
    def from_mapping(cls, values: Mapping[str, str], base: "ExperimentConfig" = None,
                     sym_table: dict = None) -> "ExperimentConfig":
        """
        :param values: raw string values keyed by field name
        :param base: config to override, defaults to the built-in defaults
        :param sym_table: constants usable inside numeric values
        """
        evaluator = ConfigEval(sym_table)
        updates = {}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in CONFIG_KINDS:
                raise ConfigurationError(f"unknown setting '{key}'")
            updates[key] = coerce(str(raw), CONFIG_KINDS[key], key=key, evaluator=evaluator)
        return replace(base or cls(), **updates)

    def to_dict(self) -> dict:
        payload = asdict(self)
        for key, value in payload.items():
            if isinstance(value, tuple):
                payload[key] = list(value)
        return payload

    @property
    def task_label(self) -> str:
        if self.task == "synthetic":
            return f"synthetic delta={self.delta:g}"
        return f"csv {Path(self.csv_path).name}"

    @property
    def resolved_lambda(self) -> float:
        if self.lam is not None:
            return float(self.lam)
        if self.task == "synthetic":
            return DELTA_LAMBDA.get(float(self.delta), SIMULATION_DEFAULT_LAMBDA)
        return TABULAR_DEFAULT_LAMBDA

    def seeds(self) -> List[int]:
        return [int(self.seed) + r for r in range(int(self.repeats))]

    def layer_sizes(self, input_dim: int) -> List[int]:
        return [int(input_dim), *self.hidden, 2]

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs, batch_size=self.batch_size, learning_rate=self.learning_rate,
            seed=seed, optimizer=self.optimizer, beta1=self.beta1, beta2=self.beta2,
            eps=self.eps, momentum=self.momentum, patience=self.patience,
        )

    def fold_train_config(self, seed: int) -> TrainConfig:
        cfg = self.train_config(seed)
        if self.fold_epochs is not None:
            cfg = replace(cfg, epochs=self.fold_epochs)
        if self.fold_learning_rate is not None:
            cfg = replace(cfg, learning_rate=self.fold_learning_rate)
        return cfg

    def loss_config(self, method: str) -> LossConfig:
        return LossConfig(variant=method, lam=self.resolved_lambda, clamp_c=self.clamp_c)

    def output_path(self, kind: str = "experiment") -> Path:
        if self.output_dir:
            return Path(self.output_dir)
        return Path(default_output_root()) / kind

    def cache_file(self, seed: int) -> Optional[Path]:
        if not self.cache_path:
            return None
        return Path(self.cache_path.replace("{seed}", str(seed)))


@dataclass
class MethodRun:
    """One method trained and evaluated on one seed."""
    method: str
    seed: int
    metrics: Optional[MetricsReport] = None
    train_residual: Optional[float] = None
    test_residual: Optional[float] = None
    best_epoch: Optional[int] = None
    epochs_run: int = 0
    error: Optional[str] = None
    # per-sample test columns for CSV export; not part of report.json
    predictions: Optional[Dict[str, np.ndarray]] = field(default=None, repr=False, compare=False)

    @property
    def ok(self) -> bool:
        return self.error is None and self.metrics is not None

    def to_dict(self) -> dict:
        payload = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "predictions"}
        payload["metrics"] = None if self.metrics is None else self.metrics.to_dict()
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "MethodRun":
        payload = dict(payload)
        metrics = payload.pop("metrics")
        return cls(metrics=None if metrics is None else MetricsReport.from_dict(metrics), **payload)


@dataclass
class RunReport:
    kind: str
    task: str
    methods: List[str]
    config: dict
    runs: List[MethodRun] = field(default_factory=list)
    aggregates: Dict[str, dict] = field(default_factory=dict)
    checks: List[dict] = field(default_factory=list)
    notices: List[str] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def runs_for(self, method: str, ok_only: bool = True) -> List[MethodRun]:
        return [run for run in self.runs if run.method == method and (run.ok or not ok_only)]

    def mean(self, method: str, metric: str) -> Optional[float]:
        entry = self.aggregates.get(method, {}).get(metric)
        return None if entry is None else entry["mean"]

    def failed_checks(self, method: Optional[str] = None) -> List[dict]:
        return [check for check in self.checks
                if not check["passed"] and (method is None or check.get("method") == method)]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "task": self.task,
            "methods": list(self.methods),
            "config": self.config,
            "runs": [run.to_dict() for run in self.runs],
            "aggregates": self.aggregates,
            "checks": self.checks,
            "notices": self.notices,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RunReport":
        return cls(
            kind=payload["kind"],
            task=payload["task"],
            methods=list(payload["methods"]),
            config=payload["config"],
            runs=[MethodRun.from_dict(run) for run in payload["runs"]],
            aggregates=payload["aggregates"],
            checks=payload.get("checks", []),
            notices=payload.get("notices", []),
            provenance=payload.get("provenance", {}),
        )


def _metric_values(run: MethodRun) -> Dict[str, Optional[float]]:
    metrics = run.metrics
    values = {
        "rmse": metrics.rmse,
        "ermse": metrics.ermse,
        "mean_residual": metrics.mean_residual,
        "mean_error_estimate": metrics.mean_error_estimate,
        "train_residual": run.train_residual,
    }
    for eta, value in metrics.pir_curve or ():
        values[f"pir@{eta:g}"] = value
    return values


def aggregate(runs: Sequence[MethodRun], methods: Sequence[str]) -> Dict[str, dict]:
    """Mean and sample standard deviation of every metric over the successful seeds."""
    table = {}
    for method in methods:
        collected: Dict[str, List[float]] = {}
        for run in runs:
            if run.method != method or not run.ok:
                continue
            for name, value in _metric_values(run).items():
                if value is not None:
                    collected.setdefault(name, []).append(float(value))
        table[method] = {
            name: {
                "mean": float(np.mean(values)),
                "std": float(np.std(values, ddof=1)) if len(values) > 1 else None,
                "n": len(values),
            }
            for name, values in collected.items()
        }
    return table


def prepare_data(cfg: ExperimentConfig, seed: int, table=None):
    """
    :param table: pre-loaded CSV dataset, re-read from ``cfg.csv_path`` otherwise
    :return: ``(train, val or None, test)``
    """
    if cfg.task == "synthetic":
        n = cfg.n_train + cfg.n_val + cfg.n_test
        data = generate_synthetic(SyntheticConfig(n=n, delta=cfg.delta, seed=seed, noise_family=cfg.noise_family))
        train_set, val_set, test_set = split_counts(data, (cfg.n_train, cfg.n_val, cfg.n_test), seed)
    else:
        if table is None:
            table = load_csv(cfg.csv_path, cfg.input_cols, cfg.target_col, cfg.normalize)
        train_set, val_set, test_set = split(table, cfg.fractions, seed)
    return train_set, (val_set if len(val_set) else None), test_set


def obtain_cache(cfg: ExperimentConfig, train_set, val_set, seed: int, output_dir: Path):
    """
    Load a fingerprint-matching cache from ``cfg.cache_path`` or build and save a fresh one.

    :return: ``(cache, notices)``
    """
    notices = []
    fold_cfg = cfg.fold_train_config(seed)
    sizes = cfg.layer_sizes(train_set.dim)
    expected = config_fingerprint(fold_cfg, signal_layer_sizes(sizes, train_set.dim), cfg.linear_tail)
    path = cfg.cache_file(seed)
    if path is not None and path.exists():
        cache = load_cache(path, expected_fingerprint=expected)
        if cache.fingerprint != expected:
            if not cfg.allow_stale_cache:
                raise CacheIntegrityError(
                    f"residual cache {path} is stale for this experiment; rebuild it or allow stale caches")
            notices.append(f"seed {seed}: using stale residual cache {path}")
        missing = cache.missing(train_set.indices)
        if missing:
            raise CacheMissError(missing)
        logger.info("seed %d: loaded residual cache %s", seed, path)
        return cache, notices

    plan = make_fold_plan(len(train_set), cfg.m, seed)
    logger.info("seed %d: computing virtual residuals with %d folds", seed, cfg.m)
    cache = compute_virtual_residuals(train_set, plan, fold_cfg, sizes, cfg.linear_tail,
                                      validation=val_set, workers=cfg.workers)
    save_cache(cache, path or output_dir / "caches" / f"residuals_seed{seed}.csv")
    return cache, notices


def prediction_columns(test_set, y_hat, e_hat=None, noise_family: str = "gaussian") -> Dict[str, np.ndarray]:
    """
    Per-sample test columns: sample id, raw inputs, ``y_star``, ``y_hat`` and
    ``e_hat``. Synthetic data adds the true signal ``f``, the noise level
    ``sigma`` and ``ideal_error``, the expected absolute noise at ``sigma``.
    """
    inputs = test_set.inputs
    if test_set.feature_stats is not None:
        inputs = test_set.feature_stats.inverse(inputs)
    columns = {"index": test_set.indices}
    for j, name in enumerate(test_set.columns):
        columns[name] = inputs[:, j]
    columns["y_star"] = test_set.targets
    columns["y_hat"] = np.asarray(y_hat, dtype=np.float64)
    if e_hat is not None:
        columns["e_hat"] = np.asarray(e_hat, dtype=np.float64)
    if test_set.is_synthetic:
        columns["f"] = test_set.signal
        columns["sigma"] = test_set.noise_sigma
        columns["ideal_error"] = ideal_mean_error(test_set.noise_sigma, noise_family)
    return columns


def _train_method(cfg: ExperimentConfig, method: str, seed: int, initial, train_set, val_set,
                  test_set, cache, keep_pairs: bool) -> MethodRun:
    loss_cfg = cfg.loss_config(method)
    run = MethodRun(method=method, seed=seed)
    try:
        trained, log = train(initial, train_set, cfg.train_config(seed), loss_cfg,
                             residuals=cache if loss_cfg.requires_cache else None,
                             validation=val_set)
        run.best_epoch, run.epochs_run = log.best_epoch, len(log.epochs)
        y_train, _ = forward_batch(trained, train_set.inputs)
        run.train_residual = float(np.mean(np.abs(y_train - train_set.targets)))
        y, w = forward_batch(trained, test_set.inputs)
        e_hat = predicted_error(w, method, cfg.clamp_c)
        if e_hat is not None:
            if not np.all(np.isfinite(e_hat)):
                raise NumericError(f"{method} produced non-finite error estimates")
            e_hat = np.maximum(e_hat, np.finfo(np.float64).tiny)
        run.metrics = evaluate(y, test_set.targets, e_hat, DEFAULT_ETA_GRID, keep_pairs=keep_pairs)
        run.test_residual = run.metrics.mean_residual
        if keep_pairs:
            run.predictions = prediction_columns(test_set, y, e_hat, cfg.noise_family)
    except NumericError as err:
        run.error = str(err)
        logger.error("seed %d, %s: %s; excluded from aggregates", seed, method, err)
    return run


def _gap_check(cfg: ExperimentConfig, run: MethodRun) -> Optional[dict]:
    if cfg.task != "synthetic" or run.method not in JOINT_VARIANTS or not run.ok:
        return None
    passed = run.train_residual < run.test_residual
    return {"name": "overfit_gap", "method": run.method, "seed": run.seed, "passed": bool(passed),
            "train_residual": run.train_residual, "test_residual": run.test_residual}


def enforce_checks(cfg: ExperimentConfig, report: RunReport):
    """
    Log every failed diagnostic check of ``report``; with ``cfg.strict_checks``
    raise ``CheckFailedError`` carrying the report.
    """
    failed = report.failed_checks()
    for check in failed:
        details = {key: value for key, value in check.items() if key not in ("name", "method", "seed", "passed")}
        logger.error("check %s failed for %s, seed %s: %s", check["name"], check.get("method", "-"),
                     check["seed"], details)
    if failed and cfg.strict_checks:
        raise CheckFailedError(failed, report)


def _collect(cfg: ExperimentConfig, kind: str) -> RunReport:
    started = time.perf_counter()
    output_dir = cfg.output_path(kind)
    report = RunReport(kind=kind, task=cfg.task_label, methods=list(cfg.methods), config=cfg.to_dict())
    ignoring = [m for m in cfg.methods if not cfg.loss_config(m).uses_lambda]
    if cfg.lam is not None and ignoring:
        report.notices.append(f"lam={cfg.lam:g} is ignored by {', '.join(ignoring)}")
        logger.warning(report.notices[-1])

    table = None
    if cfg.task == "csv":
        table = load_csv(cfg.csv_path, cfg.input_cols, cfg.target_col, cfg.normalize)
    needs_cache = any(cfg.loss_config(m).requires_cache for m in cfg.methods)
    fingerprints = {}

    for seed in cfg.seeds():
        train_set, val_set, test_set = prepare_data(cfg, seed, table)
        logger.info("seed %d: %d train, %d val, %d test samples", seed, len(train_set),
                    0 if val_set is None else len(val_set), len(test_set))
        cache = None
        if needs_cache:
            cache, notices = obtain_cache(cfg, train_set, val_set, seed, output_dir)
            report.notices += notices
            fingerprints[str(seed)] = cache.fingerprint
            if cfg.diagnose_cache:
                in_sample = in_sample_residuals(train_set, cfg.fold_train_config(seed),
                                                cfg.layer_sizes(train_set.dim), cfg.linear_tail, val_set)
                check = {"name": "virtual_residual_gap", "method": SEPARATE_LAPLACE, "seed": seed,
                         "mean_r_tilde": float(cache.r_tilde.mean()),
                         "mean_in_sample": float(in_sample.mean())}
                check["passed"] = check["mean_r_tilde"] > check["mean_in_sample"]
                report.checks.append(check)

        initial = init_model(cfg.layer_sizes(train_set.dim), seed, linear_tail=cfg.linear_tail)
        for method in cfg.methods:
            run = _train_method(cfg, method, seed, initial, train_set, val_set, test_set, cache, keep_pairs=True)
            report.runs.append(run)
            if run.error:
                report.notices.append(f"seed {seed}, {method}: {run.error} (excluded from aggregates)")
            else:
                logger.info("seed %d, %s: rmse %.4g, ermse %s", seed, method, run.metrics.rmse,
                            "-" if run.metrics.ermse is None else f"{run.metrics.ermse:.4g}")
            check = _gap_check(cfg, run)
            if check is not None:
                report.checks.append(check)

    report.aggregates = aggregate(report.runs, cfg.methods)
    report.provenance = {
        "seeds": cfg.seeds(),
        "lambda": cfg.resolved_lambda,
        "clamp_c": cfg.clamp_c,
        "train_config": cfg.train_config(cfg.seed).to_dict(),
        "fold_train_config": cfg.fold_train_config(cfg.seed).to_dict() if needs_cache else None,
        "cache_fingerprints": fingerprints,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "finished_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "wall_clock_seconds": round(time.perf_counter() - started, 3),
    }
    return report


def run_experiment(cfg: ExperimentConfig, kind: str = "experiment", emit: bool = True) -> RunReport:
    """
    Train every method of ``cfg`` on every seed and evaluate on the test split.

    :param cfg: experiment description
    :param kind: report kind, also the default output sub-directory
    :param emit: write the report files to the output directory
    :raises CheckFailedError: a diagnostic check failed and ``cfg.strict_checks`` is set
    :rtype: RunReport
    """
    report = _collect(cfg, kind)
    if emit:
        report_emit(report, cfg.output_path(kind))
    enforce_checks(cfg, report)
    return report


def ablation_no_vr(cfg: ExperimentConfig, emit: bool = True) -> RunReport:
    """
    Run the separate formulation with and without virtual residuals on the
    same seeds and record whether dropping them shrinks the predicted error.
    """
    methods = tuple(dict.fromkeys((*cfg.methods, SEPARATE_LAPLACE, SEPARATE_NO_VR)))
    report = _collect(replace(cfg, methods=methods), "ablation")
    for seed in cfg.seeds():
        with_vr = [r for r in report.runs_for(SEPARATE_LAPLACE) if r.seed == seed]
        without = [r for r in report.runs_for(SEPARATE_NO_VR) if r.seed == seed]
        if not (with_vr and without):
            continue
        a, b = with_vr[0].metrics.mean_error_estimate, without[0].metrics.mean_error_estimate
        report.checks.append({"name": "no_vr_underestimates", "method": SEPARATE_NO_VR, "seed": seed,
                              "passed": bool(b < a), "mean_error_estimate_vr": a, "mean_error_estimate_no_vr": b})
    if emit:
        report_emit(report, cfg.output_path("ablation"))
    enforce_checks(cfg, report)
    return report


def _fmt(entry: Optional[dict]) -> str:
    if entry is None:
        return "-"
    if entry.get("std") is None:
        return f"{entry['mean']:.3f}"
    return f"{entry['mean']:.3f} +- {entry['std']:.3f}"


def method_label(method: str, lam: Optional[float]) -> str:
    label = METHOD_LABELS[method]
    if method in (SEPARATE_LAPLACE, SEPARATE_NO_VR) and lam is not None:
        label += f" (lambda={lam:g})"
    return label


def _checks_cell(report: RunReport, method: str) -> str:
    entries = [check for check in report.checks if check.get("method") == method]
    if not entries:
        return "-"
    failed = len(report.failed_checks(method))
    return f"FAILED {failed}/{len(entries)}" if failed else "ok"


def summary_table(reports: Sequence[RunReport], eta: float = 0.5) -> str:
    """Plain-text table with one row per (task, method); failed checks show as ``FAILED k/n``."""
    header = ["task", "loss", "target RMSE", "eRMSE", f"PiR({eta:g})", "mean e_hat", "checks", "seeds"]
    rows = []
    for report in reports:
        lam = report.provenance.get("lambda")
        for method in report.methods:
            stats = report.aggregates.get(method, {})
            ok = len(report.runs_for(method))
            total = len(report.runs_for(method, ok_only=False))
            rows.append([report.task, method_label(method, lam), _fmt(stats.get("rmse")),
                         _fmt(stats.get("ermse")), _fmt(stats.get(f"pir@{eta:g}")),
                         _fmt(stats.get("mean_error_estimate")), _checks_cell(report, method), f"{ok}/{total}"])
    widths = [max(len(str(row[k])) for row in [header, *rows]) for k in range(len(header))]
    lines = [" | ".join(cell.ljust(width) for cell, width in zip(header, widths))]
    lines.append("-+-".join("-" * width for width in widths))
    lines += [" | ".join(cell.ljust(width) for cell, width in zip(row, widths)) for row in rows]
    return "\n".join(lines) + "\n"


def report_emit(report: RunReport, output_dir,
                formats: Sequence[str] = ("json", "pairs", "predictions", "table")) -> dict:
    """
    Write ``report.json``, per-method pair CSVs under ``pairs/``, per-sample
    prediction CSVs under ``predictions/`` and a plain-text ``summary.txt``.

    :return: written paths by format
    """
    output_dir = Path(output_dir)
    written = {}
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
        if "json" in formats:
            path = output_dir / "report.json"
            path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
            written["json"] = path
        if "pairs" in formats:
            written["pairs"] = []
            for run in report.runs:
                if run.ok and run.metrics.pairs is not None:
                    path = output_dir / "pairs" / f"{run.method}_seed{run.seed}.csv"
                    written["pairs"].append(write_pairs_csv(run.metrics.pairs, path))
        if "predictions" in formats:
            written["predictions"] = []
            for run in report.runs:
                if run.ok and run.predictions is not None:
                    path = output_dir / "predictions" / f"{run.method}_seed{run.seed}.csv"
                    written["predictions"].append(write_columns_csv(run.predictions, path))
        if "table" in formats:
            path = output_dir / "summary.txt"
            path.write_text(summary_table([report]))
            written["table"] = path
    except OSError as err:
        raise OutputError(f"cannot write report to {output_dir}: {err}") from err
    logger.info("report written to %s", output_dir)
    return written


def load_report(path) -> RunReport:
    path = Path(path)
    if path.is_dir():
        path = path / "report.json"
    try:
        return RunReport.from_dict(json.loads(path.read_text()))
    except OSError as err:
        raise ParseError(f"cannot read report {path}: {err}") from err
    except (json.JSONDecodeError, KeyError, TypeError) as err:
        raise ParseError(f"{path} is not a valid report: {err}") from err


def export_splits(cfg: ExperimentConfig, output_dir=None) -> List[Path]:
    """Write the train, validation and test splits of ``cfg.seed`` as CSV files."""
    output_dir = Path(output_dir) if output_dir else cfg.output_path("simulate")
    written = []
    for data in prepare_data(cfg, cfg.seed):
        if data is not None:
            written.append(write_csv(data, output_dir / f"{data.split}_seed{cfg.seed}.csv"))
    logger.info("wrote %d splits to %s", len(written), output_dir)
    return written


def build_folds(cfg: ExperimentConfig, output_dir=None) -> Path:
    """Compute and save the residual cache for ``cfg.seed``, ignoring any existing cache file."""
    output_dir = Path(output_dir) if output_dir else cfg.output_path("folds")
    train_set, val_set, _ = prepare_data(cfg, cfg.seed)
    plan = make_fold_plan(len(train_set), cfg.m, cfg.seed)
    cache = compute_virtual_residuals(train_set, plan, cfg.fold_train_config(cfg.seed),
                                      cfg.layer_sizes(train_set.dim), cfg.linear_tail,
                                      validation=val_set, workers=cfg.workers)
    path = cfg.cache_file(cfg.seed) or output_dir / f"residuals_seed{cfg.seed}.csv"
    return save_cache(cache, path)


def train_checkpoint(cfg: ExperimentConfig, method: str, output_dir=None) -> Path:
    """
    Train one method on ``cfg.seed`` and save it; the checkpoint meta holds
    everything ``evaluate_checkpoint`` needs to rebuild the test split.
    """
    if method not in VARIANTS:
        raise ConfigurationError(f"unknown method '{method}', expected one of {VARIANTS}")
    output_dir = Path(output_dir) if output_dir else cfg.output_path("train")
    seed = cfg.seed
    train_set, val_set, _ = prepare_data(cfg, seed)
    loss_cfg = cfg.loss_config(method)
    cache = None
    if loss_cfg.requires_cache:
        cache, _ = obtain_cache(cfg, train_set, val_set, seed, output_dir)
    initial = init_model(cfg.layer_sizes(train_set.dim), seed, linear_tail=cfg.linear_tail)
    trained, log = train(initial, train_set, cfg.train_config(seed), loss_cfg,
                         residuals=cache, validation=val_set)
    meta = {
        "variant": method,
        "clamp_c": cfg.clamp_c,
        "lambda": cfg.resolved_lambda,
        "seed": seed,
        "experiment": cfg.to_dict(),
        "training": log.to_dict(),
        "cache_fingerprint": None if cache is None else cache.fingerprint,
    }
    path = save_checkpoint(trained, output_dir / f"{method}_seed{seed}.json", meta)
    logger.info("%s trained for %d epochs, saved to %s", method, len(log.epochs), path)
    return path


def evaluate_checkpoint(path, pairs_path=None) -> MetricsReport:
    """Rebuild the test split a checkpoint was trained against and evaluate the model on it."""
    model, meta = load_checkpoint(path)
    try:
        cfg = ExperimentConfig(**meta["experiment"])
        method, clamp_c = meta["variant"], float(meta["clamp_c"])
    except (KeyError, TypeError) as err:
        raise ParseError(f"checkpoint {path} lacks experiment metadata: {err}") from err
    _, _, test_set = prepare_data(cfg, cfg.seed)
    y, w = forward_batch(model, test_set.inputs)
    metrics = evaluate(y, test_set.targets, predicted_error(w, method, clamp_c))
    if pairs_path is not None and metrics.pairs is not None:
        write_pairs_csv(metrics.pairs, pairs_path)
    return metrics
