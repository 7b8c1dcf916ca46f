#!/usr/bin/env python3

"""
Leave-one-fold-out production of virtual residuals.

For every fold ``j`` a fresh signal-only model is trained with plain L1 loss
on the samples outside fold ``j`` and then predicts fold ``j``; the absolute
errors of those predictions are the virtual residuals. Fold models are
discarded afterwards, only residuals, checksums and training summaries stay.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import PipelineError, ShapeError
from ..losses import L1_ONLY, LossConfig
from ..netcore import (SIMULATION_LINEAR_TAIL, TrainConfig, forward_batch,
                       init_model, model_checksum, simulation_layer_sizes, train)
from ..seeding import STREAM_FOLD_MODEL, derive_seed
from .fold_plan import FoldPlan
from .residual_cache import ResidualCache, config_fingerprint

logger = logging.getLogger(__name__)

SIGNAL_LOSS = LossConfig(variant=L1_ONLY)
# seed keys: fold models and the all-data diagnostic model
FOLD_KEY = 1
ALL_DATA_KEY = 0


def signal_layer_sizes(layer_sizes: Optional[Sequence[int]], input_dim: int):
    """Architecture of a fold model: the main architecture with a single head."""
    if layer_sizes is None:
        return simulation_layer_sizes(input_dim, heads=1)
    sizes = [int(s) for s in layer_sizes]
    if sizes[0] != input_dim:
        raise ShapeError(f"architecture expects input dimension {sizes[0]}, data has {input_dim}")
    return sizes[:-1] + [1]


def _fold_config(cfg: TrainConfig, *keys: int) -> TrainConfig:
    return replace(cfg, seed=derive_seed(cfg.seed, STREAM_FOLD_MODEL, *keys))


def compute_virtual_residuals(data, plan: FoldPlan, fold_train_cfg: TrainConfig,
                              layer_sizes: Optional[Sequence[int]] = None,
                              linear_tail: int = SIMULATION_LINEAR_TAIL,
                              validation=None, workers: int = 1,
                              on_batch: Optional[Callable[[int, np.ndarray], None]] = None) -> ResidualCache:
    """
    :param data: training ``Dataset``; plan positions refer to its rows
    :param plan: fold plan over ``len(data)`` positions
    :param fold_train_cfg: training configuration shared by all fold models
                           (each fold derives its own seed from it)
    :param layer_sizes: main-model architecture, the head count is replaced by 1;
                        defaults to the simulation architecture
    :param linear_tail: trailing layers without ReLU
    :param validation: optional early-stopping set for the fold models
    :param workers: fold trainings run on this many threads
    :param on_batch: called with ``(fold, sample ids)`` for every minibatch
    :rtype: ResidualCache
    """
    if plan.n != len(data):
        raise ShapeError(f"fold plan covers {plan.n} samples, dataset has {len(data)}")
    sizes = signal_layer_sizes(layer_sizes, data.dim)

    def run_fold(fold: int):
        held_out = plan.members(fold)
        kept = np.flatnonzero(plan.assignment != fold)
        cfg = _fold_config(fold_train_cfg, FOLD_KEY, fold)
        model = init_model(sizes, cfg.seed, linear_tail=linear_tail)
        observer = None if on_batch is None else (lambda ids: on_batch(fold, ids))
        trained, log = train(model, data.subset(kept), cfg, SIGNAL_LOSS,
                             validation=validation, on_batch=observer)
        y, _ = forward_batch(trained, data.inputs[held_out])
        residuals = np.abs(y - data.targets[held_out])
        for position, value in zip(held_out, residuals):
            if not np.isfinite(value):
                raise PipelineError(int(data.indices[position]), fold, float(value))
        logger.info("fold %d/%d: trained on %d, predicted %d, mean residual %.4g",
                    fold + 1, plan.m, len(kept), len(held_out), residuals.mean())
        summary = {"fold": fold, "epochs": len(log.epochs), "best_epoch": log.best_epoch,
                   "final_train_loss": log.epochs[-1].train_loss}
        return fold, held_out, residuals, model_checksum(trained), summary

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_fold, range(plan.m)))
    else:
        results = [run_fold(fold) for fold in range(plan.m)]

    r_tilde = np.empty(len(data))
    checksums = [None] * plan.m
    summaries = [None] * plan.m
    for fold, held_out, residuals, checksum, summary in results:
        r_tilde[held_out] = residuals
        checksums[fold] = checksum
        summaries[fold] = summary

    return ResidualCache(
        indices=data.indices,
        folds=plan.assignment,
        r_tilde=r_tilde,
        checksums=tuple(checksums),
        plan=plan,
        fingerprint=config_fingerprint(fold_train_cfg, sizes, linear_tail),
        layer_sizes=tuple(sizes),
        linear_tail=linear_tail,
        fold_logs=tuple(summaries),
    )


def in_sample_residuals(data, fold_train_cfg: TrainConfig, layer_sizes: Optional[Sequence[int]] = None,
                        linear_tail: int = SIMULATION_LINEAR_TAIL, validation=None) -> np.ndarray:
    """
    Absolute training residuals of one signal-only model trained on all of
    ``data`` with the fold configuration.
    """
    sizes = signal_layer_sizes(layer_sizes, data.dim)
    cfg = _fold_config(fold_train_cfg, ALL_DATA_KEY)
    model = init_model(sizes, cfg.seed, linear_tail=linear_tail)
    trained, _ = train(model, data, cfg, SIGNAL_LOSS, validation=validation)
    y, _ = forward_batch(trained, data.inputs)
    return np.abs(y - data.targets)
