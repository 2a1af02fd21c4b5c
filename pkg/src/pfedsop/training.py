"""Mini-batch SGD on one client's training rows."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass
class SGDResult:
    x_final: np.ndarray
    grad_sum: np.ndarray  # running sum of every stochastic gradient applied
    mean_loss: float  # mean of the first epoch's batch losses
    steps: int


def minibatches(n, batch_size, rng):
    """Index arrays for one shuffled epoch; the last short batch is kept."""
    order = rng.permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def local_sgd(objective, x_start, X, y, eta, epochs, batch_size, rng, grad_fn=None) -> SGDResult:
    """Run ``epochs`` passes of SGD from ``x_start``.

    ``grad_fn(params, X_batch, y_batch) -> (loss, grad)`` defaults to the
    objective's own loss and gradient; FedProx swaps in a proximal version.
    """
    n = len(y)
    if n == 0:
        raise DataError("client has no training samples")
    if grad_fn is None:
        grad_fn = objective.loss_and_gradient
    x = np.array(x_start, dtype=np.float64)
    grad_sum = np.zeros_like(x)
    first_losses = []
    steps = 0
    for epoch in range(epochs):
        for idx in minibatches(n, batch_size, rng):
            loss, g = grad_fn(x, X[idx], y[idx])
            if epoch == 0:
                first_losses.append(loss)
            x -= eta * g
            grad_sum += g
            steps += 1
    mean_loss = math.fsum(first_losses) / len(first_losses) if first_losses else float("nan")
    return SGDResult(x, grad_sum, mean_loss, steps)
