"""Reference methods that share the federated round loop.

Each method is a :class:`MethodPolicy`: where a sampled client starts local
training, which model gets evaluated, which gradient local SGD follows, and
how the server folds the mean gradient update back in.  FedAvg runs in
gradient-update form: ``x_global -= eta2 * mean(delta)``.  That equals
averaging the locally trained models.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError
from .numkit import _pair
from .training import local_sgd


def fedprox_gradient(objective, params, X, y, x_anchor, mu):
    """Gradient of the local loss plus ``mu/2 * |params - x_anchor|^2``."""
    if mu < 0:
        raise ParameterError(f"mu must be >= 0, got {mu!r}")
    g = objective.gradient(params, X, y)
    if mu == 0:
        return g
    params, x_anchor = _pair(params, x_anchor)
    return g + mu * (params - x_anchor)


def _prox_grad_fn(objective, x_anchor, mu):
    if mu == 0:
        return None

    def grad_fn(params, X, y):
        loss, g = objective.loss_and_gradient(params, X, y)
        return loss, g + mu * (params - x_anchor)

    return grad_fn


def fedavg_client_step(objective, x_global, X, y, h, rng, grad_fn=None):
    """Local SGD from the broadcast global model; returns ``(delta, mean_loss)``."""
    res = local_sgd(objective, x_global, X, y, h.eta2, h.local_epochs, h.batch_size, rng, grad_fn)
    return (np.asarray(x_global) - res.x_final) / h.eta2, res.mean_loss


def fine_tune_then_eval(objective, x_global, X_train, y_train, X_test, y_test, ft_epochs, h, rng):
    """Evaluate a locally fine-tuned copy of ``x_global``; the copy is discarded."""
    if ft_epochs < 0:
        raise ParameterError("ft_epochs must be >= 0")
    x = np.array(x_global, dtype=np.float64)
    if ft_epochs > 0:
        x = local_sgd(objective, x, X_train, y_train, h.eta2, ft_epochs, h.batch_size, rng).x_final
    return objective.evaluate(x, X_test, y_test)


class MethodPolicy:
    """Per-method hooks called by the round loop.  Subclasses override."""

    name = ""
    personalizes = False
    global_model = False  # server keeps and moves x_global

    def start_point(self, client, server, h):
        """``(x, report)``: the model local SGD starts from and a diagnostics report."""
        raise NotImplementedError

    def grad_fn(self, objective, x_start, h):
        return None

    def evaluate(self, objective, client, x_start, x_final, h, rng):
        return objective.evaluate(x_start, client.X_test, client.y_test)

    def stored_model(self, x_start, x_final):
        """What the client keeps as its own model after the round."""
        return x_start

    def server_update(self, server, mean_delta, h):
        if self.global_model:
            server.x_global = server.x_global - h.eta2 * mean_delta


class FedAvg(MethodPolicy):
    name = "fedavg"
    global_model = True

    def start_point(self, client, server, h):
        return server.x_global, None


class FedProx(FedAvg):
    name = "fedprox"

    def grad_fn(self, objective, x_start, h):
        return _prox_grad_fn(objective, x_start, h.mu)


class _FineTuned:
    def evaluate(self, objective, client, x_start, x_final, h, rng):
        return fine_tune_then_eval(
            objective, x_start, client.X_train, client.y_train,
            client.X_test, client.y_test, h.ft_epochs, h, rng,
        )


class FedAvgFT(_FineTuned, FedAvg):
    name = "fedavg_ft"


class FedProxFT(_FineTuned, FedProx):
    name = "fedprox_ft"


class PFedSOPNoPC(MethodPolicy):
    """Ablation: no personalization component.

    A returning client resumes plain local SGD from its own previous post-SGD
    model.  The server still averages updates so the logs match pFedSOP's.
    """

    name = "pfedsop_no_pc"

    def start_point(self, client, server, h):
        if client.last_delta is None:
            return server.x_init, None
        return client.x, None

    def stored_model(self, x_start, x_final):
        return x_final


POLICIES = {p.name: p for p in (FedAvg(), FedProx(), FedAvgFT(), FedProxFT(), PFedSOPNoPC())}
