import numpy as np
import pytest

from pfedsop.fedcore import ClientState, HyperParams, ServerState
from pfedsop.models import QuadraticObjective


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def quadratic_federation(n_clients=1, x0=1.0, n_train=4):
    """Clients whose data is irrelevant to ``P(x) = x^2 / 2``."""
    X = np.zeros((n_train, 1))
    y = np.zeros(n_train, dtype=int)
    clients = [ClientState(i, X, y, X[:1], y[:1]) for i in range(n_clients)]
    return QuadraticObjective(1), clients, ServerState(np.array([x0]))


def full_batch_hparams(**kw):
    """One full-batch SGD step per round on tiny client sets."""
    base = dict(eta1=1.0, eta2=0.1, rho=1.0, lam=1.0, batch_size=1000,
                local_epochs=1, participation_fraction=1.0)
    base.update(kw)
    return HyperParams(**base)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
