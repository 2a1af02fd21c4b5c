"""Small softmax classifiers over a flat parameter vector.

Two architectures are supported, both trained with mean categorical
cross-entropy:

* ``logistic_regression``: ``logits = X @ W1 + b1``
* ``mlp``: ``logits = relu(X @ W1 + b1) @ W2 + b2``

Flat layout is ``W1`` (row-major, ``fan_in x fan_out``), ``b1``, then ``W2``
(row-major) and ``b2`` for the MLP.  Gradients are derived by hand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DataError, DimensionError, ParameterError

LOG_PROB_FLOOR = math.log(1e-12)

KINDS = ("logistic_regression", "mlp")


class Batch(NamedTuple):
    inputs: np.ndarray
    labels: np.ndarray


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    input_dim: int
    num_classes: int
    hidden_dim: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown model kind {self.kind!r}")
        if self.input_dim < 1:
            raise ParameterError("input_dim must be >= 1")
        if self.num_classes < 2:
            raise ParameterError("num_classes must be >= 2")
        if self.kind == "mlp" and self.hidden_dim < 1:
            raise ParameterError("mlp needs hidden_dim >= 1")
        if self.kind == "logistic_regression" and self.hidden_dim != 0:
            raise ParameterError("logistic_regression takes hidden_dim = 0")

    @property
    def layers(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) of each dense layer."""
        if self.kind == "mlp":
            return [(self.input_dim, self.hidden_dim), (self.hidden_dim, self.num_classes)]
        return [(self.input_dim, self.num_classes)]

    @property
    def parameter_count(self) -> int:
        return sum(i * o + o for i, o in self.layers)

    def unpack(self, params):
        """Views ``[(W, b), ...]`` into ``params``; no copies."""
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (self.parameter_count,):
            raise DimensionError(
                f"expected {self.parameter_count} parameters, got shape {params.shape}"
            )
        out, pos = [], 0
        for i, o in self.layers:
            w = params[pos:pos + i * o].reshape(i, o)
            pos += i * o
            b = params[pos:pos + o]
            pos += o
            out.append((w, b))
        return out

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        """Scaled-uniform weights, zero biases."""
        chunks = []
        for i, o in self.layers:
            a = math.sqrt(6.0 / (i + o))
            chunks.append(rng.uniform(-a, a, size=i * o))
            chunks.append(np.zeros(o))
        return np.concatenate(chunks)

    # -- objective surface used by the training loops -------------------------

    def loss(self, params, X, y) -> float:
        return forward_loss(self, params, Batch(X, y))[0]

    def gradient(self, params, X, y) -> np.ndarray:
        return _loss_and_grad(self, params, X, y)[1]

    def loss_and_gradient(self, params, X, y) -> tuple[float, np.ndarray]:
        return _loss_and_grad(self, params, X, y)

    def evaluate(self, params, X, y) -> tuple[float, float]:
        return evaluate(self, params, X, y)


def _check_batch(spec: ModelSpec, X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[1] != spec.input_dim:
        raise DimensionError(f"inputs must be (n, {spec.input_dim}), got {X.shape}")
    if y.shape != (X.shape[0],):
        raise DimensionError(f"labels must have shape ({X.shape[0]},), got {y.shape}")
    if X.shape[0] == 0:
        raise DataError("empty batch")
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite values in inputs")
    if y.min() < 0 or y.max() >= spec.num_classes:
        raise DataError(f"labels must lie in [0, {spec.num_classes})")
    return X, y.astype(np.intp, copy=False)


def _logits(spec: ModelSpec, params, X):
    layers = spec.unpack(params)
    if spec.kind == "mlp":
        (w1, b1), (w2, b2) = layers
        pre = X @ w1 + b1
        hidden = np.maximum(pre, 0.0)
        return hidden @ w2 + b2, pre, hidden
    (w1, b1), = layers
    return X @ w1 + b1, None, None


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def forward_loss(spec: ModelSpec, params, batch: Batch) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and the softmax probabilities of ``batch``."""
    X, y = _check_batch(spec, *batch)
    logits = _logits(spec, params, X)[0]
    logp = _log_softmax(logits)
    picked = np.maximum(logp[np.arange(len(y)), y], LOG_PROB_FLOOR)
    return float(-picked.mean()), np.exp(logp)


def _loss_and_grad(spec: ModelSpec, params, X, y):
    X, y = _check_batch(spec, X, y)
    n = X.shape[0]
    logits, pre, hidden = _logits(spec, params, X)
    logp = _log_softmax(logits)
    rows = np.arange(n)
    loss = float(-np.maximum(logp[rows, y], LOG_PROB_FLOOR).mean())

    # d loss / d logits; the floor is ignored (it only bites at p < 1e-12)
    dz = np.exp(logp)
    dz[rows, y] -= 1.0
    dz /= n

    grad = np.empty(spec.parameter_count)
    if spec.kind == "mlp":
        (_, _), (w2, _) = spec.unpack(params)
        d_hidden = (dz @ w2.T) * (pre > 0)
        parts = [X.T @ d_hidden, d_hidden.sum(axis=0), hidden.T @ dz, dz.sum(axis=0)]
    else:
        parts = [X.T @ dz, dz.sum(axis=0)]
    pos = 0
    for p in parts:
        grad[pos:pos + p.size] = p.ravel()
        pos += p.size
    return loss, grad


def gradient(spec: ModelSpec, params, batch: Batch) -> np.ndarray:
    """Analytic gradient of :func:`forward_loss` w.r.t. the flat parameters."""
    return _loss_and_grad(spec, params, *batch)[1]


def evaluate(spec: ModelSpec, params, X, y) -> tuple[float, float]:
    """(accuracy, mean loss) with argmax prediction; ties go to the lower class."""
    if len(X) == 0:
        raise DataError("cannot evaluate on an empty dataset")
    X, y = _check_batch(spec, X, y)
    logits = _logits(spec, params, X)[0]
    logp = _log_softmax(logits)
    acc = float(np.mean(np.argmax(logits, axis=1) == y))
    loss = float(-np.maximum(logp[np.arange(len(y)), y], LOG_PROB_FLOOR).mean())
    return acc, loss


class QuadraticObjective:
    """``P(x) = 0.5 * |x|^2`` with the data ignored.

    A stand-in objective with a known minimizer at the origin, used to trace
    the federated loops by hand.  Accuracy is reported as 0.
    """

    def __init__(self, dim: int = 1):
        self.parameter_count = dim

    def init_params(self, rng):
        return np.ones(self.parameter_count)

    def loss(self, params, X, y):
        p = np.asarray(params, dtype=np.float64)
        return 0.5 * float(p @ p)

    def gradient(self, params, X, y):
        return np.array(params, dtype=np.float64)

    def loss_and_gradient(self, params, X, y):
        return self.loss(params, X, y), self.gradient(params, X, y)

    def evaluate(self, params, X, y):
        return 0.0, self.loss(params, X, y)
