"""Pure-Python (numpy) twin of the compiled ``_kernels`` extension.

Used when the extension is not built or ``PFEDSOP_PURE_PYTHON=1`` is set.
"""

import math

import numpy as np


def dot(a, b):
    return float(np.dot(a, b))


def _cosine_from_sums(ab, aa, bb, eps):
    na, nb = math.sqrt(aa), math.sqrt(bb)
    if na <= eps or nb <= eps:
        return 0.0
    return min(1.0, max(-1.0, ab / (na * nb)))


def cosine(a, b, eps):
    return _cosine_from_sums(float(np.dot(a, b)), float(np.dot(a, a)), float(np.dot(b, b)), eps)


def blend(a, b, beta):
    return (1.0 - beta) * a + beta * b


def fim_step(d, rho):
    # (d d^T + rho I)^-1 d collapses to d / (rho + |d|^2); the two-term
    # Sherman-Morrison form cancels catastrophically once |d|^2 >> rho.
    return d * (1.0 / (rho + float(np.dot(d, d))))


def personalize(x, local, glob, eta1, rho, lam, eps):
    sim = cosine(local, glob, eps)
    theta = math.acos(sim)
    wl = math.exp(-math.exp(-lam * (theta - 1.0)))
    beta = 1.0 - wl
    p = wl * local + beta * glob
    s = float(np.dot(p, p))
    return x - (eta1 / (rho + s)) * p, sim, theta, beta, math.sqrt(s) / (rho + s)
