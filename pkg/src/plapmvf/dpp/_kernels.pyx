# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# cython: language_level=3
"""Compiled sweep kernels for the DPP solver.

Every interior node ``k`` sees the stored field through a fixed stencil: the
value at quadrature point ``q`` is ``sum_c cw[q, c] * U[k + off[q, c]]``.  The
pointwise problem ``sum_q w_q J_p(V_q - a) + target = 0`` is decreasing in
``a`` and is solved by Newton inside a bisection bracket.
"""

from cython.parallel cimport prange
from libc.math cimport fabs, exp, log, sqrt, cbrt, INFINITY
from libc.stdlib cimport malloc, free

import numpy as np

cdef int MAX_ITER = 200


cdef inline double _jp(double t, int mode, double pm1) noexcept nogil:
    cdef double e
    if t == 0.0:
        return 0.0
    if mode == 1:
        return t
    if mode == 2:
        return t * fabs(t)
    if mode == 3:
        return t * t * t
    if mode == 4:
        return sqrt(t) if t > 0.0 else -sqrt(-t)
    e = exp(pm1 * log(fabs(t)))
    return e if t > 0.0 else -e


cdef inline double _djp(double t, int mode, double pm1) noexcept nogil:
    if mode == 1:
        return 1.0
    if mode == 2:
        return 2.0 * fabs(t)
    if mode == 3:
        return 3.0 * t * t
    if t == 0.0:
        return INFINITY if pm1 < 1.0 else 0.0
    if mode == 4:
        return 0.5 / sqrt(fabs(t))
    return pm1 * exp((pm1 - 1.0) * log(fabs(t)))


cdef inline double _jp_inv(double s, int mode, double pm1) noexcept nogil:
    cdef double e
    if s == 0.0:
        return 0.0
    if mode == 1:
        return s
    if mode == 2:
        return sqrt(s) if s > 0.0 else -sqrt(-s)
    if mode == 3:
        return cbrt(s)
    if mode == 4:
        return s * fabs(s)
    e = exp(log(fabs(s)) / pm1)
    return e if s > 0.0 else -e


cdef inline void _g(const double* V, const double* w, Py_ssize_t Q, double a,
                    double target, int mode, double pm1, double* g, double* dg,
                    double* scale) noexcept nogil:
    cdef Py_ssize_t q
    cdef double s = target, ds = 0.0, sc = fabs(target), t, j
    for q in range(Q):
        t = V[q] - a
        j = w[q] * _jp(t, mode, pm1)
        s += j
        sc += fabs(j)
        ds -= w[q] * _djp(t, mode, pm1)
    g[0] = s
    dg[0] = ds
    scale[0] = sc


cdef double _solve(const double* V, const double* w, Py_ssize_t Q, double target,
                   double a0, int mode, double pm1, double tol_a, int check,
                   int* steps, int* fail) noexcept nogil:
    cdef Py_ssize_t q
    cdef double lo = INFINITY, hi = -INFINITY, s, a_lo, a_hi, a, an, est
    cdef double g, dg, sc, mid
    cdef int it, closed
    for q in range(Q):
        if V[q] < lo:
            lo = V[q]
        if V[q] > hi:
            hi = V[q]
    s = _jp_inv(target, mode, pm1)
    a_lo = lo + s
    a_hi = hi + s
    if a_hi <= a_lo:
        return a_lo
    if check:
        _g(V, w, Q, a_lo, target, mode, pm1, &g, &dg, &sc)
        if g < -1e-12 * sc:
            fail[0] = fail[0] | 1
        _g(V, w, Q, a_hi, target, mode, pm1, &g, &dg, &sc)
        if g > 1e-12 * sc:
            fail[0] = fail[0] | 1
    a = a0
    if not (a_lo < a < a_hi):
        a = 0.5 * (a_lo + a_hi)
    est = a
    closed = 0
    for it in range(MAX_ITER):
        _g(V, w, Q, a, target, mode, pm1, &g, &dg, &sc)
        steps[0] += 1
        if g == 0.0:
            return a
        if g > 0.0:
            a_lo = a
        else:
            a_hi = a
        if a_hi - a_lo <= tol_a:
            closed = 1
            break
        mid = 0.5 * (a_lo + a_hi)
        if dg < 0.0 and dg > -INFINITY:
            an = a - g / dg
        else:
            an = mid
        if fabs(an - a) <= 0.5 * tol_a and a_lo <= an <= a_hi:
            # Newton has converged; probe half a tolerance towards the root
            # so the next evaluation closes the bracket.
            est = an
            an = an + 0.5 * tol_a if g > 0.0 else an - 0.5 * tol_a
            if not (a_lo < an < a_hi):
                an = mid
        elif not (a_lo < an < a_hi):
            an = mid
        a = an
    if not closed:
        fail[0] = fail[0] | 2
    if a_lo <= est <= a_hi:
        return est
    return 0.5 * (a_lo + a_hi)


cdef inline void _interp(const double* U, Py_ssize_t k, const long long[:, ::1] off,
                         const double[:, ::1] cw, double* V) noexcept nogil:
    cdef Py_ssize_t q, c, Q = off.shape[0], K = off.shape[1]
    cdef double s
    for q in range(Q):
        s = 0.0
        for c in range(K):
            s = s + cw[q, c] * U[k + off[q, c]]
        V[q] = s


def jacobi_sweep(const double[::1] U_old, double[::1] U_new, const long long[::1] nodes,
                 const long long[:, ::1] offsets, const double[:, ::1] corner_w,
                 const double[::1] qw, const double[::1] target, double p, int mode,
                 double tol_a, int threads, bint check_bracket,
                 int[::1] steps, int[::1] fail):
    """One Jacobi sweep; each node reads only ``U_old``."""
    cdef Py_ssize_t n = nodes.shape[0], Q = qw.shape[0], i, k
    cdef double pm1 = p - 1.0
    cdef double* V
    cdef int nthreads = threads if threads > 0 else 1
    with nogil:
        for i in prange(n, num_threads=nthreads, schedule="static"):
            V = <double*> malloc(Q * sizeof(double))
            k = nodes[i]
            _interp(&U_old[0], k, offsets, corner_w, V)
            U_new[k] = _solve(V, &qw[0], Q, target[i], U_old[k], mode, pm1, tol_a,
                              check_bracket, &steps[i], &fail[i])
            free(V)


def gauss_seidel_sweep(double[::1] U, const long long[::1] nodes,
                       const long long[:, ::1] offsets, const double[:, ::1] corner_w,
                       const double[::1] qw, const double[::1] target, double p, int mode,
                       double tol_a, bint check_bracket, int[::1] steps, int[::1] fail):
    """In-place sweep in node order (serial)."""
    cdef Py_ssize_t n = nodes.shape[0], Q = qw.shape[0], i, k
    cdef double pm1 = p - 1.0
    cdef double* V = <double*> malloc(Q * sizeof(double))
    try:
        with nogil:
            for i in range(n):
                k = nodes[i]
                _interp(&U[0], k, offsets, corner_w, V)
                U[k] = _solve(V, &qw[0], Q, target[i], U[k], mode, pm1, tol_a,
                              check_bracket, &steps[i], &fail[i])
    finally:
        free(V)


def operator_values(const double[::1] U, const long long[::1] nodes,
                    const long long[:, ::1] offsets, const double[:, ::1] corner_w,
                    const double[::1] qw, const double[::1] a, double p, int mode):
    """``sum_q w_q J_p(V_q - a_i)`` for every node ``i``."""
    cdef Py_ssize_t n = nodes.shape[0], Q = qw.shape[0], i, q
    cdef double pm1 = p - 1.0, s
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double* V = <double*> malloc(Q * sizeof(double))
    try:
        with nogil:
            for i in range(n):
                _interp(&U[0], nodes[i], offsets, corner_w, V)
                s = 0.0
                for q in range(Q):
                    s = s + qw[q] * _jp(V[q] - a[i], mode, pm1)
                o[i] = s
    finally:
        free(V)
    return out
