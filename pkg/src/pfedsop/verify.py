"""Oracle suites behind ``pfedsop verify``.

Each suite checks one implementation path against an independent oracle and
returns a :class:`SuiteResult`.  Implementations are looked up at call time so
a monkeypatched (fault-injected) function is what gets checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fedcore, models, personalization
from .training import minibatches


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str


def dense_fisher_solve(delta, rho):
    """Reference: build ``delta delta^T + rho I`` and solve against ``delta``."""
    delta = np.asarray(delta, dtype=np.float64)
    F = np.outer(delta, delta) + rho * np.eye(delta.size)
    return np.linalg.solve(F, delta)


def check_sherman_morrison(cases=200, max_dim=50, tol=1e-8, seed=1):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        d = int(rng.integers(1, max_dim + 1))
        delta = rng.standard_normal(d) * 10.0 ** rng.uniform(-2, 1)
        rho = 10.0 ** rng.uniform(-2, 1)
        got = personalization.fim_step(delta, rho)
        worst = max(worst, float(np.max(np.abs(got - dense_fisher_solve(delta, rho)))))
    return SuiteResult("sherman_morrison", worst <= tol, f"max abs error {worst:.3e} (tol {tol:g})")


def check_collinearity(cases=100, max_dim=100_000, tol=1e-12, seed=2):
    rng = np.random.default_rng(seed)
    worst = 0.0
    dims = np.unique(np.geomspace(1, max_dim, cases).astype(int))
    dims = np.concatenate([dims, rng.integers(1, max_dim + 1, cases - dims.size)])
    for d in dims:
        delta = rng.standard_normal(int(d)) * 10.0 ** rng.uniform(-3, 1)
        rho = 10.0 ** rng.uniform(-3, 1)
        expected = delta / (rho + math.fsum(delta * delta))
        got = personalization.fim_step(delta, rho)
        err = float(np.max(np.abs(got - expected)) / np.max(np.abs(expected)))
        worst = max(worst, err)
    return SuiteResult("collinearity", worst <= tol, f"max relative error {worst:.3e} (tol {tol:g})")


def random_instance(rng, kind=None):
    """A random (spec, params, X, y) with non-saturated logits."""
    kind = kind or ("mlp" if rng.random() < 0.5 else "logistic_regression")
    in_dim = int(rng.integers(2, 8))
    classes = int(rng.integers(2, 5))
    hidden = int(rng.integers(2, 7)) if kind == "mlp" else 0
    spec = models.ModelSpec(kind, in_dim, classes, hidden)
    params = spec.init_params(rng) + 0.1 * rng.standard_normal(spec.parameter_count)
    n = int(rng.integers(3, 12))
    return spec, params, rng.standard_normal((n, in_dim)), rng.integers(0, classes, n)


def finite_difference_errors(spec, params, X, y, coords, h=1e-5, grad=None):
    """Per-coordinate ``|analytic - central FD| / max(|analytic|, |FD|, 1e-6)``."""
    grad = grad or models.gradient
    g = grad(spec, params, models.Batch(X, y))
    errs = []
    for j in coords:
        e = np.zeros_like(params)
        e[j] = h
        lp = models.forward_loss(spec, params + e, models.Batch(X, y))[0]
        lm = models.forward_loss(spec, params - e, models.Batch(X, y))[0]
        fd = (lp - lm) / (2 * h)
        errs.append(abs(g[j] - fd) / max(abs(g[j]), abs(fd), 1e-6))
    return errs


def check_finite_differences(instances=20, coords=50, tol=1e-4, seed=3, grad=None):
    grad = grad or models.gradient
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(instances):
        spec, params, X, y = random_instance(rng, "mlp" if i % 2 else "logistic_regression")
        picks = rng.choice(spec.parameter_count, size=min(coords, spec.parameter_count), replace=False)
        worst = max(worst, max(finite_difference_errors(spec, params, X, y, picks, grad=grad)))
    return SuiteResult("finite_difference", worst <= tol, f"max relative error {worst:.3e} (tol {tol:g})")


def check_delta_sum(instances=20, max_steps=20, tol=5e-7, seed=4):
    """(x0 - xT)/eta2 from the training loop vs. a replayed sum of gradients."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        spec, params, _, _ = random_instance(rng, "mlp")
        steps = int(rng.integers(1, max_steps + 1))
        batch_size = int(rng.integers(1, 6))
        n = steps * batch_size - int(rng.integers(0, batch_size))
        X = rng.standard_normal((n, spec.input_dim))
        y = rng.integers(0, spec.num_classes, n)
        h = fedcore.HyperParams(eta2=float(10.0 ** rng.uniform(-3, -1)), batch_size=batch_size)
        stream = int(rng.integers(2**31))
        delta, _, _ = fedcore.local_gradient_update(spec, params, X, y, h, np.random.default_rng(stream))

        x = params.copy()
        acc = np.zeros_like(x)
        for idx in minibatches(n, batch_size, np.random.default_rng(stream)):
            g = models.gradient(spec, x, models.Batch(X[idx], y[idx]))
            acc += g
            x = x - h.eta2 * g
        worst = max(worst, float(np.max(np.abs(delta - acc)) / np.max(np.abs(acc))))
    return SuiteResult("delta_sum", worst <= tol, f"max relative error {worst:.3e} (tol {tol:g})")


def check_gompertz(lams=(0.5, 1.0, 2.5, 5.0), grid=1000):
    """theta=1 fixed point, plus monotonicity on a grid.

    Strictness is checked on the complement ``1 - beta``: for large ``lam``
    beta itself saturates at 1.0 in float64 near theta=0.
    """
    fixed = max(abs(personalization.gompertz_weight(1.0, lam) - (1 - math.exp(-1))) for lam in lams)
    thetas = np.linspace(0.0, math.pi, grid)
    strict = non_increasing = True
    for lam in lams:
        comp = [personalization.gompertz_complement(t, lam) for t in thetas]
        beta = [personalization.gompertz_weight(t, lam) for t in thetas]
        strict &= all(a < b for a, b in zip(comp, comp[1:]))
        non_increasing &= all(a >= b for a, b in zip(beta, beta[1:]))
    ok = fixed <= 1e-12 and strict and non_increasing
    return SuiteResult(
        "gompertz", ok,
        f"theta=1 deviation {fixed:.1e}, 1-beta strictly increasing: {strict}, beta non-increasing: {non_increasing}",
    )


SUITES = (
    check_sherman_morrison,
    check_collinearity,
    check_finite_differences,
    check_delta_sum,
    check_gompertz,
)


def run_all():
    return [suite() for suite in SUITES]
