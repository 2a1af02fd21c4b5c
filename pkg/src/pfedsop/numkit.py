"""Flat parameter-vector kernels, keyed RNG streams and angle geometry.

Every model quantity (parameters, gradients, gradient updates) is a 1-D
``float64`` numpy array.  The O(d) kernels run on a compiled extension when it
is importable and fall back to numpy otherwise; set ``PFEDSOP_PURE_PYTHON=1``
to force the fallback.  ``BACKEND`` names the active implementation.
"""

from __future__ import annotations

import math
import os
import zlib

import numpy as np

from .errors import ContractError, DimensionError, ParameterError

if os.environ.get("PFEDSOP_PURE_PYTHON") == "1":
    from . import _kernels_py as _backend
else:
    try:
        from . import _kernels as _backend
    except ImportError:  # extension not built
        from . import _kernels_py as _backend

BACKEND = "compiled" if _backend.__name__.endswith("._kernels") else "python"

#: Norms at or below this are treated as vanishing.
ZERO_NORM = 1e-12


def as_vector(values) -> np.ndarray:
    """Return ``values`` as a contiguous float64 vector (copy only if needed)."""
    v = np.ascontiguousarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"expected a flat vector, got shape {v.shape}")
    return v


def _pair(a, b):
    a, b = as_vector(a), as_vector(b)
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    return a, b


def add(a, b) -> np.ndarray:
    a, b = _pair(a, b)
    return a + b


def subtract(a, b) -> np.ndarray:
    a, b = _pair(a, b)
    return a - b


def scale(a, s: float) -> np.ndarray:
    return as_vector(a) * float(s)


def dot(a, b) -> float:
    a, b = _pair(a, b)
    return _backend.dot(a, b)


def l2_norm(a) -> float:
    a = as_vector(a)
    return math.sqrt(_backend.dot(a, a))


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between ``a`` and ``b``, clamped to [-1, 1].

    Returns 0 when either vector has norm <= ``ZERO_NORM``.
    """
    a, b = _pair(a, b)
    return _backend.cosine(a, b, ZERO_NORM)


def angle_from_similarity(sim: float) -> float:
    """Angle in radians, in [0, pi], whose cosine is ``sim``."""
    sim = float(sim)
    if not -1.0 <= sim <= 1.0:
        raise ContractError(f"similarity {sim!r} outside [-1, 1]")
    return math.acos(sim)


# --------------------------------------------------------------------------
# RNG streams
# --------------------------------------------------------------------------

def _key_word(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if isinstance(part, (int, np.integer)) and part >= 0:
        return int(part)
    raise ParameterError(f"stream key parts must be str or non-negative int, got {part!r}")


def rng_stream(seed: int, *key) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``.

    Streams are derived through ``SeedSequence`` spawn keys, so the draws for
    e.g. ``("client", 3, 7)`` never depend on which other streams were used or
    in which order.
    """
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(_key_word(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def dirichlet_draw(alpha: float, k: int, rng: np.random.Generator) -> np.ndarray:
    """One draw from the symmetric Dirichlet ``Dir(alpha * 1_k)``.

    Normalized Gamma(alpha, 1) variates.  For tiny ``alpha`` every Gamma draw
    can underflow to zero; the draw is then repeated.
    """
    if not alpha > 0:
        raise ParameterError(f"alpha must be > 0, got {alpha!r}")
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k!r}")
    if k == 1:
        return np.ones(1)
    while True:
        g = rng.gamma(alpha, 1.0, size=k)
        total = g.sum()
        if total > 0:
            return g / total
