# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled multinomial rectangle kernels.

Same contracts as :mod:`maxload._pykernels`; binomial rows are built by the
ratio recurrence anchored at the mode and renormalised, instead of scipy.
"""
import numpy as np
cimport numpy as cnp

from libc.math cimport floor

cnp.import_array()

BACKEND = "cython"


cdef void _fill_binomial_row(double[:, ::1] B, Py_ssize_t m, double q) noexcept nogil:
    cdef Py_ssize_t x, mode
    cdef double ratio, total
    for x in range(m + 1):
        B[m, x] = 0.0
    if q <= 0.0:
        B[m, 0] = 1.0
        return
    if q >= 1.0:
        B[m, m] = 1.0
        return
    mode = <Py_ssize_t>floor((m + 1) * q)
    if mode > m:
        mode = m
    B[m, mode] = 1.0
    ratio = q / (1.0 - q)
    for x in range(mode, m):
        B[m, x + 1] = B[m, x] * ((m - x) / (x + 1.0)) * ratio
    ratio = (1.0 - q) / q
    for x in range(mode, 0, -1):
        B[m, x - 1] = B[m, x] * (x / (m - x + 1.0)) * ratio
    total = 0.0
    for x in range(m + 1):
        total += B[m, x]
    for x in range(m + 1):
        B[m, x] /= total


def binomial_table(int T, double q):
    """``B[m, x] = P(Binomial(m, q) = x)`` for ``0 <= x <= m <= T``."""
    cdef cnp.ndarray[double, ndim=2] arr = np.zeros((T + 1, T + 1))
    cdef double[:, ::1] B = arr
    cdef Py_ssize_t m
    with nogil:
        for m in range(T + 1):
            _fill_binomial_row(B, m, q)
    return arr


cdef double[:, :, ::1] _tables(double[::1] q, int T):
    cdef Py_ssize_t k = q.shape[0], i, m
    cdef double[:, :, ::1] tabs = np.zeros((k, T + 1, T + 1))
    with nogil:
        for i in range(k):
            for m in range(T + 1):
                _fill_binomial_row(tabs[i], m, q[i])
    return tabs


def rectangular_probability(q, int T, lower, upper):
    """``P(lower <= L <= upper)`` for the category counts of a multinomial."""
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef cnp.int64_t[::1] lo = np.ascontiguousarray(lower, dtype=np.int64)
    cdef cnp.int64_t[::1] hi = np.ascontiguousarray(upper, dtype=np.int64)
    cdef Py_ssize_t k = qv.shape[0], i, s, x, a, b, top
    cdef cnp.int64_t need = 0
    for i in range(k):
        need += lo[i]
    if need > T:
        return 0.0
    cdef double[:, :, ::1] tabs = _tables(qv, T)
    cdef double[::1] g = np.zeros(T + 1)
    cdef double[::1] nxt = np.zeros(T + 1)
    cdef double total = 0.0, gs
    g[0] = 1.0
    with nogil:
        for i in range(k):
            for s in range(T + 1):
                nxt[s] = 0.0
            a = lo[i]
            b = hi[i]
            for s in range(T + 1):
                gs = g[s]
                if gs == 0.0:
                    continue
                top = b
                if top > T - s:
                    top = T - s
                for x in range(a, top + 1):
                    nxt[s + x] += gs * tabs[i, T - s, x]
            for s in range(T + 1):
                g[s] = nxt[s]
        for s in range(T + 1):
            total += g[s]
    if total < 0.0:
        return 0.0
    if total > 1.0:
        return 1.0
    return total


def max_load_partition(q, int T):
    """``F[l, j] = P(max load = l and category j is the first to attain it)``."""
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef Py_ssize_t k = qv.shape[0]
    cdef double[:, :, ::1] tabs = _tables(qv, T)
    out = np.zeros((T + 1, k))
    cdef double[:, ::1] F = out
    cdef double[:, ::1] prefix = np.zeros((k + 1, T + 1))
    cdef double[:, ::1] suffix = np.zeros((k + 1, T + 1))
    cdef Py_ssize_t level, i, j, s, x, top
    cdef double acc, gs
    with nogil:
        for level in range(1, T + 1):
            for i in range(k + 1):
                for s in range(T + 1):
                    prefix[i, s] = 0.0
                    suffix[i, s] = 0.0
            prefix[0, 0] = 1.0
            for i in range(k):
                for s in range(T + 1):
                    gs = prefix[i, s]
                    if gs == 0.0:
                        continue
                    top = level - 1
                    if top > T - s:
                        top = T - s
                    for x in range(top + 1):
                        prefix[i + 1, s + x] += gs * tabs[i, T - s, x]
            for s in range(T + 1):
                suffix[k, s] = 1.0
            for i in range(k - 1, -1, -1):
                for s in range(T + 1):
                    top = level
                    if top > T - s:
                        top = T - s
                    acc = 0.0
                    for x in range(top + 1):
                        acc += tabs[i, T - s, x] * suffix[i + 1, s + x]
                    suffix[i, s] = acc
            for j in range(k):
                acc = 0.0
                for s in range(T + 1 - level):
                    acc += prefix[j, s] * tabs[j, T - s, level] * suffix[j + 1, s + level]
                if acc < 0.0:
                    acc = 0.0
                elif acc > 1.0:
                    acc = 1.0
                F[level, j] = acc
    return out
