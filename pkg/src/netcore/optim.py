#!/usr/bin/env python3

"""
First-order optimizers updating parameter arrays in place; training passes
the single ``MlpModel.flat`` buffer.
"""

from typing import List, Sequence

import numpy as np


class Sgd:
    """Stochastic gradient descent with optional heavy-ball momentum."""

    def __init__(self, params: Sequence[np.ndarray], learning_rate: float, momentum: float = 0.0):
        self.params = list(params)
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.velocity = [np.zeros_like(p) for p in self.params]

    def step(self, grads: List[np.ndarray]):
        for param, grad, velocity in zip(self.params, grads, self.velocity):
            if self.momentum:
                velocity *= self.momentum
                velocity += grad
                grad = velocity
            param -= self.learning_rate * grad


class Adam:
    """Adam with bias-corrected first and second moment estimates."""

    def __init__(self, params: Sequence[np.ndarray], learning_rate: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]

    def step(self, grads: List[np.ndarray]):
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for param, grad, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            m_hat = m / correction1
            v_hat = v / correction2
            param -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(cfg, params: Sequence[np.ndarray]):
    """Build the optimizer a ``TrainConfig`` names."""
    if cfg.optimizer == "sgd":
        return Sgd(params, cfg.learning_rate, cfg.momentum)
    return Adam(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
