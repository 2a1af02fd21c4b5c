# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled flat-vector kernels.

Mirrors ``_kernels_py`` function for function. Callers (``numkit``) validate
lengths and dtypes; everything here assumes contiguous float64 inputs of equal
length.
"""

import numpy as np

from libc.math cimport acos, exp, sqrt


cpdef double dot(const double[::1] a, const double[::1] b):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double acc = 0.0
    for i in range(n):
        acc += a[i] * b[i]
    return acc


cpdef double cosine(const double[::1] a, const double[::1] b, double eps):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double ab = 0.0, aa = 0.0, bb = 0.0
    for i in range(n):
        ab += a[i] * b[i]
        aa += a[i] * a[i]
        bb += b[i] * b[i]
    return _cosine_from_sums(ab, aa, bb, eps)


cdef inline double _cosine_from_sums(double ab, double aa, double bb, double eps):
    cdef double na = sqrt(aa), nb = sqrt(bb), sim
    if na <= eps or nb <= eps:
        return 0.0
    sim = ab / (na * nb)
    if sim > 1.0:
        return 1.0
    if sim < -1.0:
        return -1.0
    return sim


cpdef blend(const double[::1] a, const double[::1] b, double beta):
    cdef Py_ssize_t i, n = a.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double wa = 1.0 - beta
    for i in range(n):
        o[i] = wa * a[i] + beta * b[i]
    return out


cpdef fim_step(const double[::1] d, double rho):
    cdef Py_ssize_t i, n = d.shape[0]
    cdef double s = 0.0, coef
    for i in range(n):
        s += d[i] * d[i]
    coef = 1.0 / (rho + s)
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = d[i] * coef
    return out


cpdef tuple personalize(
    const double[::1] x,
    const double[::1] local,
    const double[::1] glob,
    double eta1,
    double rho,
    double lam,
    double eps,
):
    """Fused blend + rank-one Fisher step; no length-d temporaries."""
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double ab = 0.0, aa = 0.0, bb = 0.0
    for i in range(n):
        ab += local[i] * glob[i]
        aa += local[i] * local[i]
        bb += glob[i] * glob[i]
    cdef double sim = _cosine_from_sums(ab, aa, bb, eps)
    cdef double theta = acos(sim)
    # weight on the local update, kept separate from beta so it does not
    # round to 0 when beta rounds to 1
    cdef double wl = exp(-exp(-lam * (theta - 1.0)))
    cdef double beta = 1.0 - wl, p, s = 0.0
    for i in range(n):
        p = wl * local[i] + beta * glob[i]
        s += p * p
    cdef double coef = eta1 / (rho + s)
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = x[i] - coef * (wl * local[i] + beta * glob[i])
    return out, sim, theta, beta, sqrt(s) / (rho + s)
