#!/usr/bin/env python3

"""
Synthetic heteroscedastic regression task.

Inputs are uniform on [0, 1). The signal is ``2x - 1`` with a step of height
``delta`` at x = 0.5, and the noise standard deviation grows linearly from
0.01 at x = 0 towards 2 at x = 1.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from ..seeding import STREAM_DATA, make_rng
from .dataset import Dataset

STEP_AT = 0.5
SIGMA_SLOPE = 1.99
SIGMA_FLOOR = 0.01


def _gaussian(rng, sigma):
    return rng.standard_normal(sigma.shape[0]) * sigma


def _laplace(rng, sigma):
    # scale sigma / sqrt(2) gives standard deviation sigma
    return rng.laplace(0.0, 1.0, sigma.shape[0]) * sigma / math.sqrt(2.0)


NOISE_FAMILIES = {
    "gaussian": _gaussian,
    "laplace": _laplace,
}

# E|n| / sigma for noise of standard deviation sigma
MEAN_ABS_FACTOR = {
    "gaussian": math.sqrt(2.0 / math.pi),
    "laplace": 1.0 / math.sqrt(2.0),
}


@dataclass(frozen=True)
class SyntheticConfig:
    n: int = 628
    delta: float = 0.0
    seed: int = 0
    noise_family: str = "gaussian"

    def __post_init__(self):
        if int(self.n) <= 0:
            raise ConfigurationError(f"synthetic sample count must be positive, got {self.n}")
        if not math.isfinite(self.delta):
            raise ConfigurationError(f"delta must be finite, got {self.delta}")
        if self.noise_family not in NOISE_FAMILIES:
            raise ConfigurationError(
                f"unknown noise family '{self.noise_family}', expected one of {tuple(NOISE_FAMILIES)}")


def signal(x, delta: float = 0.0):
    """``f(x) = 2x - 1`` below the step, ``2x - 1 + delta`` from x = 0.5 on."""
    x = np.asarray(x, dtype=np.float64)
    return 2.0 * x - 1.0 + delta * (x >= STEP_AT)


def noise_sigma(x):
    """``sigma(x) = 1.99 x + 0.01``."""
    return SIGMA_SLOPE * np.asarray(x, dtype=np.float64) + SIGMA_FLOOR


def ideal_mean_error(sigma, noise_family: str = "gaussian"):
    """
    Expected absolute noise ``E|n(x)|`` at noise level ``sigma``: what a
    perfectly calibrated error estimate predicts for a perfect signal model.
    """
    if noise_family not in MEAN_ABS_FACTOR:
        raise ConfigurationError(
            f"unknown noise family '{noise_family}', expected one of {tuple(MEAN_ABS_FACTOR)}")
    return MEAN_ABS_FACTOR[noise_family] * np.asarray(sigma, dtype=np.float64)


def generate_synthetic(cfg: SyntheticConfig) -> Dataset:
    """
    Draw ``cfg.n`` samples ``y = f(x) + n(x)``.

    :param cfg: sample count, step height, seed and noise family
    :return: dataset with ``signal`` and ``noise_sigma`` filled in
    :rtype: Dataset
    """
    rng = make_rng(cfg.seed, STREAM_DATA)
    x = rng.random(int(cfg.n))
    sigma = noise_sigma(x)
    f = signal(x, cfg.delta)
    n = NOISE_FAMILIES[cfg.noise_family](rng, sigma)
    return Dataset(
        inputs=x.reshape(-1, 1),
        targets=f + n,
        split="synthetic",
        signal=f,
        noise_sigma=sigma,
        columns=("x",),
    )
