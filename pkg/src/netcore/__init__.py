#!/usr/bin/env python3

from .mlp import (
    MlpModel, HeteroscedasticPrediction, GradientSet,
    init_model, forward, forward_batch, backward, evaluate_loss, parameter_count,
    simulation_layer_sizes, SIMULATION_LINEAR_TAIL,
    model_checksum, save_checkpoint, load_checkpoint,
)
from .optim import Sgd, Adam, make_optimizer
from .trainer import TrainConfig, TrainingLog, EpochRecord, Batch, train, l1_error
