#!/usr/bin/env python3

"""
Dense feed-forward network with two scalar heads and exact gradients.
"""

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from ..errors import ConfigurationError, OutputError, ParseError, ShapeError
from ..losses import LossConfig, batch_loss
from ..seeding import STREAM_INIT, make_rng

logger = logging.getLogger(__name__)

SIMULATION_HIDDEN = (32, 64, 128, 128, 64, 32, 16)
SIMULATION_LINEAR_TAIL = 2
CHECKPOINT_FORMAT = "vireval-mlp/1"


def simulation_layer_sizes(input_dim: int = 1, heads: int = 2) -> List[int]:
    """Eight dense layers: 32-64-128-128-64-32, a shared 16-wide layer, then the heads."""
    return [input_dim, *SIMULATION_HIDDEN, heads]


@dataclass(frozen=True)
class HeteroscedasticPrediction:
    y: float
    w: float


class MlpModel:
    """
    Dense network. Layer ``k`` maps ``layer_sizes[k]`` to ``layer_sizes[k+1]``
    with weights of shape ``(out, in)``. A ReLU follows every layer except the
    last ``linear_tail`` ones. Head 0 is the signal, head 1 the certainty.
    """

    def __init__(self, layer_sizes: Sequence[int], weights: Sequence[np.ndarray],
                 biases: Sequence[np.ndarray], seed: Optional[int] = None, linear_tail: int = 1):
        """
        :param layer_sizes: input dim, hidden widths, head count
        :param weights: one ``(out, in)`` matrix per layer
        :param biases: one ``(out,)`` vector per layer
        :param seed: init seed, kept for provenance
        :param linear_tail: number of trailing layers without activation
        """
        self.layer_sizes = _check_layer_sizes(layer_sizes)
        n_layers = len(self.layer_sizes) - 1
        if len(weights) != n_layers or len(biases) != n_layers:
            raise ShapeError(f"expected {n_layers} weight/bias pairs, got {len(weights)}/{len(biases)}")
        if not 1 <= int(linear_tail) <= n_layers:
            raise ConfigurationError(f"linear_tail must be in [1, {n_layers}], got {linear_tail}")
        # every weight and bias is a view into one contiguous buffer
        self.flat = np.empty(parameter_count(self.layer_sizes))
        self.weights = []
        self.biases = []
        offset = 0
        for k, (weight, bias) in enumerate(zip(weights, biases)):
            shape = (self.layer_sizes[k + 1], self.layer_sizes[k])
            weight = np.asarray(weight, dtype=np.float64)
            bias = np.asarray(bias, dtype=np.float64).reshape(-1)
            if weight.shape != shape or bias.shape != (shape[0],):
                raise ShapeError(f"layer {k}: expected weight {shape} and bias ({shape[0]},), "
                                 f"got {weight.shape} and {bias.shape}")
            view = self.flat[offset:offset + weight.size].reshape(shape)
            view[...] = weight
            offset += weight.size
            self.weights.append(view)
            view = self.flat[offset:offset + bias.size]
            view[...] = bias
            offset += bias.size
            self.biases.append(view)
        self.seed = seed
        self.linear_tail = int(linear_tail)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def heads(self) -> int:
        return self.layer_sizes[-1]

    def activated(self, k: int) -> bool:
        return k < self.n_layers - self.linear_tail

    def parameters(self) -> List[np.ndarray]:
        """Parameter arrays in the order ``W0, b0, W1, b1, ...``; views, not copies."""
        params = []
        for weight, bias in zip(self.weights, self.biases):
            params += [weight, bias]
        return params

    def parameter_count(self) -> int:
        return self.flat.size

    def copy(self) -> "MlpModel":
        return MlpModel(self.layer_sizes, self.weights, self.biases, self.seed, self.linear_tail)

    def load_flat(self, flat: np.ndarray):
        """Overwrite every parameter from a vector laid out like ``flat``."""
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != self.flat.shape:
            raise ShapeError(f"expected {self.flat.size} parameters, got {flat.size}")
        self.flat[...] = flat

    def to_dict(self) -> dict:
        return {
            "layer_sizes": list(self.layer_sizes),
            "linear_tail": self.linear_tail,
            "seed": self.seed,
            "layers": [
                {"weight": weight.tolist(), "bias": bias.tolist()}
                for weight, bias in zip(self.weights, self.biases)
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MlpModel":
        layers = payload["layers"]
        return cls(
            payload["layer_sizes"],
            [layer["weight"] for layer in layers],
            [layer["bias"] for layer in layers],
            seed=payload.get("seed"),
            linear_tail=payload.get("linear_tail", 1),
        )


def _check_layer_sizes(layer_sizes) -> List[int]:
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2:
        raise ConfigurationError(f"layer_sizes needs an input and an output size, got {list(layer_sizes)}")
    if any(s <= 0 for s in sizes):
        raise ConfigurationError(f"layer sizes must be positive, got {sizes}")
    if sizes[-1] not in (1, 2):
        raise ConfigurationError(f"a model has one (signal) or two (signal, certainty) heads, got {sizes[-1]}")
    return sizes


def parameter_count(layer_sizes: Sequence[int]) -> int:
    """Closed form ``sum(n_k * n_{k+1} + n_{k+1})``."""
    sizes = _check_layer_sizes(layer_sizes)
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


def init_model(layer_sizes: Sequence[int], seed: int, linear_tail: int = 1) -> MlpModel:
    """
    Glorot-uniform weights in ``+-sqrt(6 / (fan_in + fan_out))``, zero biases.

    :param layer_sizes: input dim, hidden widths, head count (1 or 2)
    :param seed: any 64-bit integer
    :param linear_tail: number of trailing layers without ReLU
    :rtype: MlpModel
    """
    sizes = _check_layer_sizes(layer_sizes)
    rng = make_rng(seed, STREAM_INIT)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(sizes, weights, biases, seed=seed, linear_tail=linear_tail)


def _as_batch(model: MlpModel, inputs) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim == 1:
        # a flat array is n scalar inputs for 1-d models, one sample otherwise
        inputs = inputs.reshape(-1, 1) if model.input_dim == 1 else inputs.reshape(1, -1)
    if inputs.ndim != 2 or inputs.shape[1] != model.input_dim:
        raise ShapeError(f"model expects inputs of dimension {model.input_dim}, got shape {inputs.shape}")
    return inputs


def _forward_trace(model: MlpModel, inputs: np.ndarray):
    activations = [inputs]
    pre_activations = []
    a = inputs
    for k, (weight, bias) in enumerate(zip(model.weights, model.biases)):
        z = a @ weight.T + bias
        pre_activations.append(z)
        a = np.maximum(z, 0.0) if model.activated(k) else z
        activations.append(a)
    return activations, pre_activations


def forward_batch(model: MlpModel, inputs):
    """
    :param inputs: ``(n, d)`` array
    :return: ``(y, w)`` arrays of shape ``(n,)``; ``w`` is ``None`` for a signal-only model
    """
    activations, _ = _forward_trace(model, _as_batch(model, inputs))
    out = activations[-1]
    return out[:, 0], (out[:, 1] if model.heads == 2 else None)


def forward(model: MlpModel, x) -> HeteroscedasticPrediction:
    """
    Single-sample forward pass. Signal-only models report ``w = 0``.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != model.input_dim:
        raise ShapeError(f"model expects inputs of dimension {model.input_dim}, got {x.shape[0]}")
    y, w = forward_batch(model, x.reshape(1, -1))
    return HeteroscedasticPrediction(y=float(y[0]), w=0.0 if w is None else float(w[0]))


@dataclass
class GradientSet:
    """Gradients aligned with ``MlpModel.parameters()`` and the batch loss they belong to."""
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    loss: float

    def as_list(self) -> List[np.ndarray]:
        grads = []
        for weight, bias in zip(self.weights, self.biases):
            grads += [weight, bias]
        return grads

    def flat(self) -> np.ndarray:
        """All gradients in the layout of ``MlpModel.flat``."""
        return np.concatenate([grad.ravel() for grad in self.as_list()])


def _batch_residuals(loss_cfg: LossConfig, batch, residuals):
    if loss_cfg.requires_cache:
        if residuals is None:
            raise ConfigurationError("separate_laplace needs a residual cache")
        return residuals.lookup(batch.indices)
    if residuals is not None:
        raise ConfigurationError(f"loss variant '{loss_cfg.variant}' does not take a residual cache")
    return None


def backward(model: MlpModel, batch, loss_cfg: LossConfig, residuals=None) -> GradientSet:
    """
    Exact gradient of the batch-mean loss with respect to every parameter.

    :param model: network, not modified
    :param batch: ``Dataset`` holding the minibatch
    :param loss_cfg: loss formulation
    :param residuals: ``ResidualCache``, required exactly for ``separate_laplace``
    :rtype: GradientSet
    """
    r_tilde = _batch_residuals(loss_cfg, batch, residuals)
    if loss_cfg.has_certainty and model.heads != 2:
        raise ConfigurationError(f"loss variant '{loss_cfg.variant}' needs a two-headed model")
    activations, pre_activations = _forward_trace(model, _as_batch(model, batch.inputs))
    out = activations[-1]
    w = out[:, 1] if model.heads == 2 else None
    loss, d_y, d_w = batch_loss(loss_cfg, out[:, 0], w, batch.targets, r_tilde)

    delta = d_y.reshape(-1, 1) if d_w is None else np.column_stack([d_y, d_w])
    grad_w = [None] * model.n_layers
    grad_b = [None] * model.n_layers
    for k in reversed(range(model.n_layers)):
        if model.activated(k):
            # subgradient 0 at the kink
            delta = delta * (pre_activations[k] > 0)
        grad_w[k] = delta.T @ activations[k]
        grad_b[k] = delta.sum(axis=0)
        if k:
            delta = delta @ model.weights[k]
    return GradientSet(weights=grad_w, biases=grad_b, loss=loss)


def evaluate_loss(model: MlpModel, batch, loss_cfg: LossConfig, residuals=None) -> float:
    """Batch-mean loss without gradients."""
    r_tilde = _batch_residuals(loss_cfg, batch, residuals)
    y, w = forward_batch(model, batch.inputs)
    return batch_loss(loss_cfg, y, w, batch.targets, r_tilde)[0]


def model_checksum(model: MlpModel) -> str:
    """SHA-256 over the architecture and raw parameter bytes."""
    digest = hashlib.sha256(json.dumps([model.layer_sizes, model.linear_tail]).encode())
    for param in model.parameters():
        digest.update(np.ascontiguousarray(param, dtype=np.float64).tobytes())
    return digest.hexdigest()


def save_checkpoint(model: MlpModel, path, meta: Optional[dict] = None) -> Path:
    """
    Write the model as JSON text. Floats are written in shortest round-trip
    form, so ``load_checkpoint`` reproduces forward outputs bit for bit.
    """
    path = Path(path)
    payload = {"format": CHECKPOINT_FORMAT, **model.to_dict(), "meta": dict(meta or {})}
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=1))
    except OSError as err:
        raise OutputError(f"cannot write checkpoint {path}: {err}") from err
    logger.debug("saved checkpoint %s", path)
    return path


def load_checkpoint(path):
    """
    :return: ``(model, meta)``
    :rtype: tuple
    """
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except OSError as err:
        raise ParseError(f"cannot read checkpoint {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ParseError(f"checkpoint {path} is not valid JSON: {err.msg}", row=err.lineno) from err
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ParseError(f"{path} is not a {CHECKPOINT_FORMAT} checkpoint")
    try:
        model = MlpModel.from_dict(payload)
    except (KeyError, TypeError) as err:
        raise ParseError(f"checkpoint {path} is missing field {err}") from err
    return model, payload.get("meta", {})
