"""Angle-weighted gradient blending and the rank-one Fisher personalization step.

A returning client blends its latest local gradient update with the latest
global one. The blend weight is a Gompertz curve of the angle between the two.
The client then moves its personalized model along the blend preconditioned by
the inverse of ``p p^T + rho I``. The inverse has a closed form, so no d x d
matrix is ever built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numkit
from .errors import ContractError, DimensionError, ParameterError


@dataclass(frozen=True)
class PersonalizationReport:
    sim: float
    theta: float
    beta: float
    step_norm: float


def gompertz_complement(theta: float, lam: float) -> float:
    """``exp(-exp(-lam * (theta - 1)))``, i.e. ``1 - gompertz_weight``.

    Evaluated directly because ``gompertz_weight`` rounds to exactly 1.0
    once this drops below ~1e-16 (small ``theta`` with large ``lam``).
    """
    if not lam > 0:
        raise ParameterError(f"lambda must be > 0, got {lam!r}")
    if not -1e-12 <= theta <= math.pi + 1e-12:
        raise ContractError(f"theta {theta!r} outside [0, pi]")
    return math.exp(-math.exp(-lam * (theta - 1.0)))


def gompertz_weight(theta: float, lam: float) -> float:
    """``1 - exp(-exp(-lam * (theta - 1)))``, decreasing in ``theta`` (radians).

    At ``theta == 1`` the result is ``1 - 1/e`` for every ``lam``.
    """
    return 1.0 - gompertz_complement(theta, lam)


def personalized_update(delta_local, delta_global, beta: float) -> np.ndarray:
    """``(1 - beta) * delta_local + beta * delta_global``."""
    if not 0.0 <= beta <= 1.0:
        raise ContractError(f"beta {beta!r} outside [0, 1]")
    a, b = numkit._pair(delta_local, delta_global)
    return numkit._backend.blend(a, b, float(beta))


def fim_step(delta_p, rho: float) -> np.ndarray:
    """Solve ``(p p^T + rho I) s = p`` in O(d).

    By Sherman-Morrison with ``B = rho I``:
    ``s = p/rho - p (p.p) / (rho^2 + rho p.p)``, which simplifies to
    ``p / (rho + p.p)``; the simplified form is what gets evaluated.
    """
    if not rho > 0:
        raise ParameterError(f"rho must be > 0, got {rho!r}")
    return numkit._backend.fim_step(numkit.as_vector(delta_p), float(rho))


def personalize_model(x_prev, delta_local_prev, delta_global_prev, h):
    """One personalization step for a returning client.

    ``h`` supplies ``eta1``, ``rho`` and ``lam``.  Returns the new personalized
    model and a :class:`PersonalizationReport`.
    """
    if not h.rho > 0:
        raise ParameterError(f"rho must be > 0, got {h.rho!r}")
    if not h.lam > 0:
        raise ParameterError(f"lambda must be > 0, got {h.lam!r}")
    if not h.eta1 > 0:
        raise ParameterError(f"eta1 must be > 0, got {h.eta1!r}")
    local, glob = numkit._pair(delta_local_prev, delta_global_prev)
    x = numkit.as_vector(x_prev)
    if x.shape != local.shape:
        raise DimensionError(f"model has {x.shape[0]} entries, updates have {local.shape[0]}")
    x_new, sim, theta, beta, step_norm = numkit._backend.personalize(
        x, local, glob, float(h.eta1), float(h.rho), float(h.lam), numkit.ZERO_NORM
    )
    return x_new, PersonalizationReport(sim, theta, beta, step_norm)


def personalize_model_reference(x_prev, delta_local_prev, delta_global_prev, h):
    """Unfused composition of the public steps; the fused kernel must agree."""
    sim = numkit.cosine_similarity(delta_local_prev, delta_global_prev)
    theta = numkit.angle_from_similarity(sim)
    beta = gompertz_weight(theta, h.lam)
    p = personalized_update(delta_local_prev, delta_global_prev, beta)
    step = fim_step(p, h.rho)
    x_new = numkit.subtract(x_prev, numkit.scale(step, h.eta1))
    return x_new, PersonalizationReport(sim, theta, beta, numkit.l2_norm(step))
