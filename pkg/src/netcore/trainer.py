#!/usr/bin/env python3

"""
Minibatch training loop with validation-based early stopping.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, List, NamedTuple, Optional

import numpy as np

from ..errors import CacheMissError, ConfigurationError, DivergenceError
from ..losses import LossConfig
from ..seeding import STREAM_SHUFFLE, make_rng
from .mlp import MlpModel, backward, evaluate_loss, forward_batch
from .optim import make_optimizer

logger = logging.getLogger(__name__)

OPTIMIZERS = ("sgd", "adam")


@dataclass(frozen=True)
class TrainConfig:
    """
    Training hyperparameters. ``learning_rate = 0`` is allowed and leaves the
    parameters untouched; ``patience = None`` disables early stopping.
    """
    epochs: int = 500
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    momentum: float = 0.0
    patience: Optional[int] = 10

    def __post_init__(self):
        if int(self.epochs) <= 0:
            raise ConfigurationError(f"epochs must be positive, got {self.epochs}")
        if int(self.batch_size) <= 0:
            raise ConfigurationError(f"batch_size must be positive, got {self.batch_size}")
        if not math.isfinite(self.learning_rate) or self.learning_rate < 0:
            raise ConfigurationError(f"learning_rate must be finite and >= 0, got {self.learning_rate}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigurationError(f"unknown optimizer '{self.optimizer}', expected one of {OPTIMIZERS}")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigurationError(f"adam betas must lie in (0, 1), got {self.beta1}, {self.beta2}")
        if self.eps <= 0:
            raise ConfigurationError(f"adam eps must be positive, got {self.eps}")
        if not 0 <= self.momentum < 1:
            raise ConfigurationError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.patience is not None and int(self.patience) <= 0:
            raise ConfigurationError(f"patience must be positive or None, got {self.patience}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_l1: Optional[float] = None
    val_loss: Optional[float] = None


@dataclass
class TrainingLog:
    epochs: List[EpochRecord] = field(default_factory=list)
    best_epoch: Optional[int] = None
    stopped_early: bool = False

    def to_dict(self) -> dict:
        return {
            "epochs": [asdict(record) for record in self.epochs],
            "best_epoch": self.best_epoch,
            "stopped_early": self.stopped_early,
        }


class Batch(NamedTuple):
    inputs: np.ndarray
    targets: np.ndarray
    indices: np.ndarray


def _batches(data, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(len(data))
    for start in range(0, len(order), batch_size):
        rows = order[start:start + batch_size]
        yield Batch(data.inputs[rows], data.targets[rows], data.indices[rows])


def l1_error(model: MlpModel, data) -> float:
    """Mean absolute error of the signal head."""
    y, _ = forward_batch(model, data.inputs)
    return float(np.mean(np.abs(y - data.targets)))


def train(model: MlpModel, data, cfg: TrainConfig, loss_cfg: LossConfig, residuals=None,
          validation=None, on_batch: Optional[Callable[[np.ndarray], None]] = None):
    """
    Train a copy of ``model``.

    :param model: initial network, left unchanged
    :param data: training ``Dataset``
    :param cfg: hyperparameters
    :param loss_cfg: loss formulation
    :param residuals: ``ResidualCache`` covering every training index, ``separate_laplace`` only
    :param validation: optional ``Dataset``; when given, the returned model is
                       the one with the lowest validation L1 error
    :param on_batch: called with the sample ids of every minibatch
    :return: ``(trained model, TrainingLog)``
    :rtype: tuple
    """
    if len(data) == 0:
        raise ConfigurationError("cannot train on an empty dataset")
    if residuals is not None and loss_cfg.requires_cache:
        missing = residuals.missing(data.indices)
        if missing:
            raise CacheMissError(missing)

    model = model.copy()
    optimizer = make_optimizer(cfg, [model.flat])
    rng = make_rng(cfg.seed, STREAM_SHUFFLE)
    log = TrainingLog()
    best_l1 = math.inf
    best_params = None
    stale = 0
    # the certainty term needs virtual residuals the validation samples do not have
    val_has_loss = validation is not None and len(validation) > 0 and not loss_cfg.requires_cache

    for epoch in range(1, int(cfg.epochs) + 1):
        total = 0.0
        for batch_number, batch in enumerate(_batches(data, int(cfg.batch_size), rng), start=1):
            if on_batch is not None:
                on_batch(batch.indices)
            grads = backward(model, batch, loss_cfg, residuals)
            if not math.isfinite(grads.loss):
                raise DivergenceError(epoch, batch_number, grads.loss)
            optimizer.step([grads.flat()])
            total += grads.loss * len(batch.targets)
        record = EpochRecord(epoch=epoch, train_loss=total / len(data))

        if validation is not None and len(validation) > 0:
            val_l1 = l1_error(model, validation)
            val_loss = evaluate_loss(model, validation, loss_cfg) if val_has_loss else None
            record = EpochRecord(epoch, record.train_loss, val_l1, val_loss)
            if not math.isfinite(val_l1):
                raise DivergenceError(epoch, 0, val_l1)
            if val_l1 < best_l1:
                best_l1, best_params, stale = val_l1, model.flat.copy(), 0
                log.best_epoch = epoch
            else:
                stale += 1
        log.epochs.append(record)
        logger.debug("epoch %d: train %.6g, val L1 %s", epoch, record.train_loss, record.val_l1)

        if cfg.patience is not None and best_params is not None and stale >= int(cfg.patience):
            log.stopped_early = True
            logger.debug("early stop after epoch %d, best epoch %d", epoch, log.best_epoch)
            break

    if best_params is not None:
        model.load_flat(best_params)
    else:
        log.best_epoch = len(log.epochs)
    return model, log
