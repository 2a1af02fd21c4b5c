import hashlib

import numpy as np
import pytest

from pfedsop import baselines, fedcore, metrics
from pfedsop.errors import DimensionError, ParameterError
from pfedsop.fedcore import ClientState, HyperParams, ServerState
from pfedsop.models import ModelSpec, QuadraticObjective

from conftest import full_batch_hparams, quadratic_federation
from test_fedcore import _blob_federation


class _ZeroGrad(QuadraticObjective):
    def gradient(self, params, X, y):
        return np.zeros_like(np.asarray(params, dtype=float))


def test_fedprox_gradient_examples():
    obj = _ZeroGrad(2)
    np.testing.assert_array_equal(
        baselines.fedprox_gradient(obj, np.array([2.0, 0.0]), None, None, np.array([1.0, 1.0]), 1.0), [1.0, -1.0])
    p = np.array([0.3, -0.7])
    np.testing.assert_array_equal(baselines.fedprox_gradient(QuadraticObjective(2), p, None, None, p, 5.0), p)


def test_fedprox_mu_zero_is_bitwise_plain(rng):
    spec, clients, server = _blob_federation()
    c = clients[0]
    p = server.x_init + rng.standard_normal(server.x_init.size)
    g = spec.gradient(p, c.X_train, c.y_train)
    got = baselines.fedprox_gradient(spec, p, c.X_train, c.y_train, server.x_init, 0.0)
    assert got.tobytes() == g.tobytes()


def test_fedprox_gradient_errors():
    obj = QuadraticObjective(2)
    with pytest.raises(DimensionError):
        baselines.fedprox_gradient(obj, np.zeros(2), None, None, np.zeros(3), 1.0)
    with pytest.raises(ParameterError):
        baselines.fedprox_gradient(obj, np.zeros(2), None, None, np.zeros(2), -1.0)


def _history_csv(method, **kw):
    spec, clients, server = _blob_federation(K=8)
    h = HyperParams(method=method, participation_fraction=0.5, batch_size=6, rounds=5, seed=7, **kw)
    res = fedcore.run_experiment(spec, clients, server, h)
    return metrics.metrics_csv(res.history) + metrics.best_csv(res.best), server


def test_fedprox_mu_zero_equals_fedavg():
    a, sa = _history_csv("fedavg")
    b, sb = _history_csv("fedprox", mu=0.0)
    assert a == b
    assert sa.x_global.tobytes() == sb.x_global.tobytes()
    c, _ = _history_csv("fedprox", mu=0.5)
    assert c != a


def test_fine_tune_leaves_global_untouched(rng):
    spec, clients, server = _blob_federation()
    c = clients[0]
    x = server.x_global
    digest = hashlib.sha256(x.tobytes()).hexdigest()
    baselines.fine_tune_then_eval(spec, x, c.X_train, c.y_train, c.X_test, c.y_test, 3, HyperParams(), rng)
    assert hashlib.sha256(x.tobytes()).hexdigest() == digest


def test_fine_tune_zero_epochs_is_plain_eval(rng):
    spec, clients, server = _blob_federation()
    c = clients[2]
    got = baselines.fine_tune_then_eval(spec, server.x_global, c.X_train, c.y_train, c.X_test, c.y_test,
                                        0, HyperParams(), rng)
    assert got == spec.evaluate(server.x_global, c.X_test, c.y_test)


def test_fine_tune_helps_on_separable_client():
    rng = np.random.default_rng(0)
    spec = ModelSpec("logistic_regression", 2, 2)
    X = np.vstack([rng.normal(-4, 1, (40, 2)), rng.normal(4, 1, (40, 2))])
    y = np.repeat([1, 0], 40)  # the "global" model below predicts the opposite
    perm = rng.permutation(80)
    X, y = X[perm], y[perm]
    x_global = np.array([1.0, -1.0, 1.0, -1.0, 0.0, 0.0])
    base, _ = spec.evaluate(x_global, X[60:], y[60:])
    tuned = [baselines.fine_tune_then_eval(spec, x_global, X[:60], y[:60], X[60:], y[60:], 5,
                                           HyperParams(eta2=0.1, batch_size=10), np.random.default_rng(s))
             for s in (1, 1)]
    assert tuned[0] == tuned[1]
    assert tuned[0][0] >= base


def test_fedavg_two_client_hand_trace():
    spec, clients, server = _blob_federation(K=2)
    h = HyperParams(method="fedavg", participation_fraction=1.0, batch_size=1000, eta2=0.3)
    x0 = server.x_global.copy()
    g = [spec.gradient(x0, c.X_train, c.y_train) for c in clients]
    fedcore.run_round(server, clients, h, spec)
    np.testing.assert_allclose(server.x_global, x0 - 0.3 * (g[0] + g[1]) / 2, rtol=1e-12, atol=1e-14)


def test_fedavg_single_client_is_plain_sgd():
    obj, clients, server = quadratic_federation(x0=2.0)
    h = full_batch_hparams(method="fedavg", eta2=0.25)
    fedcore.run_experiment(obj, clients, server, h, rounds=3)
    assert server.x_global[0] == pytest.approx(2.0 * 0.75 ** 3, abs=1e-14)


def test_fedavg_client_step_matches_policy():
    spec, clients, server = _blob_federation(K=1)
    c = clients[0]
    h = HyperParams(batch_size=5)
    d1, l1 = baselines.fedavg_client_step(spec, server.x_global, c.X_train, c.y_train, h, np.random.default_rng(3))
    d2, _, l2 = fedcore.local_gradient_update(spec, server.x_global, c.X_train, c.y_train, h, np.random.default_rng(3))
    np.testing.assert_array_equal(d1, d2)
    assert l1 == l2


def test_no_pc_round_one_matches_pfedsop():
    a = _history_csv("pfedsop")[0].splitlines()
    b = _history_csv("pfedsop_no_pc")[0].splitlines()
    round1 = [i for i, line in enumerate(a) if line.count(",") == 5 and line.startswith("1,")]
    assert round1 and [a[i] for i in round1] == [b[i] for i in round1]
    assert a != b


def test_no_pc_single_client_is_local_sgd():
    obj, clients, server = quadratic_federation()
    h = full_batch_hparams(method="pfedsop_no_pc", eta2=0.5)
    fedcore.run_experiment(obj, clients, server, h, rounds=4)
    # each round continues from the previous post-SGD model: x <- x/2
    assert clients[0].x[0] == pytest.approx(0.5 ** 4, abs=1e-15)


def test_ft_methods_keep_x_global_moving_like_base():
    a, sa = _history_csv("fedavg")
    b, sb = _history_csv("fedavg_ft")
    assert sa.x_global.tobytes() == sb.x_global.tobytes()
    assert a != b


def test_with_pc_has_lower_round_25_loss():
    from test_acceptance import _bench_stats

    for seed in (0, 1):
        assert _bench_stats("pfedsop", seed)[1] < _bench_stats("pfedsop_no_pc", seed)[1]
