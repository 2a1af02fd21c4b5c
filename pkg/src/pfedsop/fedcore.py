"""Federated state and the communication-round loop.

One round: sample a subset of clients. Each sampled client then works
independently: personalize or pick a start point, evaluate, run local SGD
to get a gradient update. Last, the server averages the fresh updates.
Per-client work draws only from RNG streams keyed by ``(seed, client,
round)``, so running clients in parallel gives the same results as
running them in order.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import baselines
from .errors import DivergenceError, ParameterError, ProtocolError
from .metrics import BestAccuracyTable, ClientRecord, record_round
from .numkit import rng_stream
from .personalization import personalize_model
from .training import local_sgd

METHODS = ("pfedsop", "pfedsop_no_pc", "fedavg", "fedprox", "fedavg_ft", "fedprox_ft")
EVAL_POINTS = ("personalized", "post_sgd")


@dataclass
class HyperParams:
    eta1: float = 1.0
    eta2: float = 0.1
    rho: float = 1.0
    lam: float = 1.0
    mu: float = 0.1
    local_epochs: int = 1
    batch_size: int = 50
    participation_fraction: float = 0.2
    rounds: int = 1
    seed: int = 0
    method: str = "pfedsop"
    ft_epochs: int = 1
    eval_point: str = "personalized"

    def __post_init__(self):
        for name in ("eta1", "eta2", "rho", "lam"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be > 0, got {getattr(self, name)!r}")
        if not self.mu >= 0:
            raise ParameterError(f"mu must be >= 0, got {self.mu!r}")
        for name in ("local_epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be >= 1")
        if self.rounds < 0 or self.ft_epochs < 0:
            raise ParameterError("rounds and ft_epochs must be >= 0")
        if not 0 < self.participation_fraction <= 1:
            raise ParameterError("participation_fraction must lie in (0, 1]")
        if self.method not in METHODS:
            raise ParameterError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.eval_point not in EVAL_POINTS:
            raise ParameterError(f"eval_point must be one of {EVAL_POINTS}")
        ratio = self.rho / self.eta1
        if not 1e-3 <= ratio <= 1e3:
            warnings.warn(f"rho/eta1 = {ratio:g} is outside [1e-3, 1e3]; the personalization step may be unstable",
                          RuntimeWarning, stacklevel=3)


@dataclass
class ClientState:
    id: int
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    x: Optional[np.ndarray] = None
    last_delta: Optional[np.ndarray] = None
    last_round_seen: Optional[int] = None


@dataclass
class ServerState:
    x_init: np.ndarray
    global_delta: Optional[np.ndarray] = None
    round: int = 0
    x_global: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.x_global is None:
            self.x_global = np.array(self.x_init, dtype=np.float64)


def participant_count(K: int, fraction: float) -> int:
    """``round(fraction * K)`` with halves rounded up."""
    return int(math.floor(fraction * K + 0.5))


def sample_clients(K: int, fraction: float, round_index: int, seed: int) -> np.ndarray:
    """Sorted ids of ``round(fraction * K)`` clients drawn without replacement."""
    if not 0 < fraction <= 1:
        raise ParameterError(f"participation fraction must lie in (0, 1], got {fraction!r}")
    k = participant_count(K, fraction)
    if not 1 <= k <= K:
        raise ParameterError(f"fraction {fraction} of {K} clients selects {k}")
    rng = rng_stream(seed, "sample", round_index)
    return np.sort(rng.choice(K, size=k, replace=False))


def local_gradient_update(objective, x_start, X, y, h, rng, grad_fn=None):
    """Run local SGD and return ``(delta, x_final, mean_loss)``.

    ``delta = (x_start - x_final) / eta2``, i.e. the sum of the stochastic
    gradients that were applied.
    """
    res = local_sgd(objective, x_start, X, y, h.eta2, h.local_epochs, h.batch_size, rng, grad_fn)
    return (np.asarray(x_start, dtype=np.float64) - res.x_final) / h.eta2, res.x_final, res.mean_loss


def aggregate_updates(deltas) -> np.ndarray:
    """Arithmetic mean of the clients' gradient updates."""
    deltas = list(deltas)
    if not deltas:
        raise ProtocolError("no gradient updates to aggregate")
    total = np.array(deltas[0], dtype=np.float64)
    for d in deltas[1:]:
        if np.shape(d) != total.shape:
            raise ProtocolError("gradient updates have mismatched lengths")
        total += d
    return total / len(deltas)


class PFedSOP(baselines.MethodPolicy):
    name = "pfedsop"
    personalizes = True

    def start_point(self, client, server, h):
        if client.last_delta is None:
            return server.x_init, None
        if server.global_delta is None:
            raise ProtocolError(f"client {client.id} returned before any global update exists")
        return personalize_model(client.x, client.last_delta, server.global_delta, h)


POLICIES = {"pfedsop": PFedSOP(), **baselines.POLICIES}


@dataclass
class _Outcome:
    record: ClientRecord
    delta: np.ndarray
    stored: np.ndarray


def _client_work(policy, objective, client, server, h, round_index):
    rng = rng_stream(h.seed, "client", client.id, round_index)
    x, report = policy.start_point(client, server, h)
    delta, x_final, train_loss = local_gradient_update(
        objective, x, client.X_train, client.y_train, h, rng, policy.grad_fn(objective, x, h)
    )
    if not math.isfinite(train_loss) or not np.all(np.isfinite(delta)):
        raise DivergenceError(round_index, client.id)
    eval_rng = rng_stream(h.seed, "finetune", client.id, round_index)
    if h.eval_point == "post_sgd" and not policy.global_model:
        acc, _ = objective.evaluate(x_final, client.X_test, client.y_test)
    else:
        acc, _ = policy.evaluate(objective, client, x, x_final, h, eval_rng)
    record = ClientRecord(
        client.id, train_loss, acc,
        None if report is None else report.theta,
        None if report is None else report.beta,
    )
    return _Outcome(record, delta, policy.stored_model(x, x_final))


def run_round(server: ServerState, clients, h: HyperParams, objective, executor=None):
    """Advance the federation by one communication round; returns RoundMetrics."""
    policy = POLICIES[h.method]
    t = server.round + 1
    sampled = [clients[i] for i in sample_clients(len(clients), h.participation_fraction, t, h.seed)]

    def work(c):
        return _client_work(policy, objective, c, server, h, t)

    outcomes = list(executor.map(work, sampled)) if executor else [work(c) for c in sampled]

    # barrier: apply client results and aggregate in client-id order
    for client, out in zip(sampled, outcomes):
        client.x = out.stored
        client.last_delta = out.delta
        client.last_round_seen = t
    server.global_delta = aggregate_updates([o.delta for o in outcomes])
    policy.server_update(server, server.global_delta, h)
    server.round = t
    return record_round(t, [o.record for o in outcomes])


@dataclass
class ExperimentResult:
    history: list = field(default_factory=list)
    best: BestAccuracyTable = field(default_factory=BestAccuracyTable)
    server: Optional[ServerState] = None
    clients: list = field(default_factory=list)


def run_experiment(objective, clients, server, h: HyperParams, threads: int = 1, rounds=None) -> ExperimentResult:
    """Run ``rounds`` (default ``h.rounds``) communication rounds.

    ``threads`` sets how many clients of a round run at once; 0 picks
    automatically.  Results do not depend on it.
    """
    rounds = h.rounds if rounds is None else rounds
    result = ExperimentResult(server=server, clients=clients)
    executor = None
    if threads != 1:
        executor = ThreadPoolExecutor(max_workers=None if threads == 0 else threads)
    try:
        for _ in range(rounds):
            m = run_round(server, clients, h, objective, executor)
            result.history.append(m)
            result.best.update(m)
    finally:
        if executor is not None:
            executor.shutdown()
    return result
