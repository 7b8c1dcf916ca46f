#!/usr/bin/env python3

"""
Loss formulations for heteroscedastic regression.

A two-headed network emits a signal ``y`` and a certainty ``w``. The absolute
residual is ``r = |y - y*|``. Laplace variants read ``w`` as ``-log b`` (b the
Laplace scale); the joint Gaussian variant reads it as ``log sigma^2``.

Every exponential of ``w`` goes through ``exp(w / c)`` with the clamp constant
``c`` of the ``LossConfig``; ``c = 1`` leaves the losses untouched.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..errors import CacheIntegrityError, ConfigurationError, NumericError

L1_ONLY = "l1_only"
JOINT_GAUSSIAN = "joint_gaussian"
JOINT_LAPLACE = "joint_laplace"
SEPARATE_LAPLACE = "separate_laplace"
SEPARATE_NO_VR = "separate_no_vr"

VARIANTS = (L1_ONLY, JOINT_GAUSSIAN, JOINT_LAPLACE, SEPARATE_LAPLACE, SEPARATE_NO_VR)
SEPARATE_VARIANTS = (SEPARATE_LAPLACE, SEPARATE_NO_VR)

GAUSSIAN_MEAN_ABS = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class LossConfig:
    """
    :param variant: one of ``VARIANTS``
    :param lam: weight of the certainty term, only read by the separate variants
    :param clamp_c: constant c of the ``exp(w / c)`` substitution
    """
    variant: str = JOINT_LAPLACE
    lam: float = 0.1
    clamp_c: float = 1.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown loss variant '{self.variant}', expected one of {VARIANTS}")
        if not math.isfinite(self.lam) or self.lam < 0:
            raise ConfigurationError(f"lambda must be finite and >= 0, got {self.lam}")
        if not math.isfinite(self.clamp_c) or self.clamp_c <= 0:
            raise ConfigurationError(f"clamp_c must be finite and > 0, got {self.clamp_c}")

    @property
    def requires_cache(self) -> bool:
        return self.variant == SEPARATE_LAPLACE

    @property
    def has_certainty(self) -> bool:
        return self.variant != L1_ONLY

    @property
    def uses_lambda(self) -> bool:
        return self.variant in SEPARATE_VARIANTS


def _check_finite(**values):
    for name, value in values.items():
        if not np.all(np.isfinite(value)):
            raise NumericError(f"{name} must be finite, got {value}")


def _scalar(value):
    value = np.asarray(value, dtype=np.float64)
    return float(value) if value.ndim == 0 else value


def loss_joint_gaussian(y, log_var, y_star):
    """
    Gaussian negative log-likelihood with the network emitting ``log sigma^2``.

    :return: ``|y* - y|^2 / (2 sigma^2) + log(sigma^2) / 2``
    """
    _check_finite(y=y, log_var=log_var, y_star=y_star)
    y, log_var, y_star = (np.asarray(v, dtype=np.float64) for v in (y, log_var, y_star))
    return _scalar(0.5 * (y_star - y) ** 2 * np.exp(-log_var) + 0.5 * log_var)


def loss_joint_laplace(y, w, y_star, clamp_c: float = 1.0):
    """
    Laplace negative log-likelihood in certainty form.

    :return: ``exp(w / c) * |y* - y| - w``
    """
    _check_finite(y=y, w=w, y_star=y_star)
    y, w, y_star = (np.asarray(v, dtype=np.float64) for v in (y, w, y_star))
    return _scalar(np.exp(w / clamp_c) * np.abs(y_star - y) - w)


def loss_separate(y, w, y_star, r_tilde, lam: float, clamp_c: float = 1.0):
    """
    Separated loss: L1 on the signal plus ``lam`` times the Laplace certainty
    term driven by the residual target ``r_tilde``. ``r_tilde`` enters the
    value only; it is a constant for differentiation.

    :return: ``|y* - y| + lam * (exp(w / c) * r_tilde - w)``
    """
    _check_finite(y=y, w=w, y_star=y_star, r_tilde=r_tilde)
    r_tilde = np.asarray(r_tilde, dtype=np.float64)
    if np.any(r_tilde < 0):
        raise CacheIntegrityError(f"virtual residual must be >= 0, got {r_tilde}")
    y, w, y_star = (np.asarray(v, dtype=np.float64) for v in (y, w, y_star))
    return _scalar(np.abs(y_star - y) + lam * (np.exp(w / clamp_c) * r_tilde - w))


def error_estimate(w, clamp_c: float = 1.0):
    """
    Absolute error implied by a certainty value: the minimiser of
    ``exp(w / c) * r - w`` over w satisfies ``r = c * exp(-w / c)``, which is
    ``exp(-w)`` for the unclamped loss.
    """
    w = np.asarray(w, dtype=np.float64)
    return _scalar(clamp_c * np.exp(-w / clamp_c))


def predicted_error(w, variant: str, clamp_c: float = 1.0):
    """
    Map the certainty head to a predicted absolute error for ``variant``.

    :return: array of predicted errors, or ``None`` for ``l1_only``
    """
    if variant == L1_ONLY:
        return None
    w = np.asarray(w, dtype=np.float64)
    if variant == JOINT_GAUSSIAN:
        # mean absolute deviation of N(0, sigma^2)
        return GAUSSIAN_MEAN_ABS * np.exp(0.5 * w)
    return np.asarray(error_estimate(w, clamp_c))


def batch_loss(cfg: LossConfig, y, w, y_star, r_tilde=None):
    """
    Batch-mean loss and its exact derivatives with respect to both heads.

    The derivative of ``|r|`` at ``r = 0`` is taken as 0.

    :param cfg: selects the formulation
    :param y: signal head, shape (n,)
    :param w: certainty head, shape (n,), may be ``None`` for ``l1_only``
    :param y_star: targets, shape (n,)
    :param r_tilde: virtual residuals, required for ``separate_laplace``
    :return: ``(loss, d_y, d_w)`` where ``d_y``/``d_w`` are derivatives of the
             mean loss per sample; ``d_w`` is ``None`` when ``w`` is
    :rtype: tuple
    """
    y = np.asarray(y, dtype=np.float64)
    y_star = np.asarray(y_star, dtype=np.float64)
    n = y.shape[0]
    diff = y - y_star
    r = np.abs(diff)
    sign = np.sign(diff)

    if cfg.variant == L1_ONLY:
        d_w = None if w is None else np.zeros(n)
        return float(r.mean()), sign / n, d_w

    if w is None:
        raise ConfigurationError(f"loss variant '{cfg.variant}' needs a certainty head")
    w = np.asarray(w, dtype=np.float64)
    c = cfg.clamp_c

    if cfg.variant == JOINT_GAUSSIAN:
        inv_var = np.exp(-w)
        loss = 0.5 * diff ** 2 * inv_var + 0.5 * w
        return float(loss.mean()), diff * inv_var / n, (0.5 - 0.5 * diff ** 2 * inv_var) / n

    scale = np.exp(w / c)
    if cfg.variant == JOINT_LAPLACE:
        loss = scale * r - w
        return float(loss.mean()), scale * sign / n, (scale * r / c - 1.0) / n

    if cfg.variant == SEPARATE_LAPLACE:
        if r_tilde is None:
            raise ConfigurationError("separate_laplace needs virtual residuals")
        target = np.asarray(r_tilde, dtype=np.float64)
        if np.any(target < 0):
            raise CacheIntegrityError("virtual residuals must be >= 0")
    else:
        # separate_no_vr: live residual, detached
        target = r
    loss = r + cfg.lam * (scale * target - w)
    return float(loss.mean()), sign / n, cfg.lam * (scale * target / c - 1.0) / n
