"""Numpy implementation of the multinomial rectangle kernels.

A multinomial vector over categories ``1..k`` (plus an unconstrained
remainder category) is unrolled as a chain of binomials: given that ``s``
trials were absorbed by categories ``1..i-1``, the count of category ``i``
is Binomial(T - s, q_i) with ``q_i = p_i / (p_0 + p_i + ... + p_k)``.
Every DP entry is then a genuine probability, so nothing overflows for
large ``T`` the way raw ``T! / prod(l_i!)`` factors would.

Each routine takes the conditional probabilities ``q`` rather than ``p``;
see :func:`maxload.oracle.conditional_probabilities`.
"""
from __future__ import annotations

import numpy as np
from scipy.stats import binom

BACKEND = "python"


def binomial_table(T: int, q: float) -> np.ndarray:
    """``B[m, x] = P(Binomial(m, q) = x)`` for ``0 <= x <= m <= T``.

    Rows are renormalised to sum to one, which removes the common scale
    error of the log-gamma evaluation.
    """
    # q near the subnormal range overflows scipy; the mass involved is below 1e-300
    q = 0.0 if q < 1e-300 else q
    m = np.arange(T + 1)[:, None]
    x = np.arange(T + 1)[None, :]
    with np.errstate(all="ignore"):
        B = np.where(x <= m, binom.pmf(x, m, q), 0.0)
    B = np.nan_to_num(B, nan=0.0)
    B /= B.sum(axis=1, keepdims=True)
    return B


def _transition(T: int, B: np.ndarray) -> np.ndarray:
    """``K[s, s + x] = B[T - s, x]``: consumed-trial transition matrix."""
    s = np.arange(T + 1)[:, None]
    t = np.arange(T + 1)[None, :]
    x = t - s
    valid = x >= 0
    K = np.zeros((T + 1, T + 1))
    K[valid] = B[(T - s + 0 * t)[valid], x[valid]]
    return K


def _offsets(T: int) -> np.ndarray:
    return np.arange(T + 1)[None, :] - np.arange(T + 1)[:, None]


def rectangular_probability(q, T: int, lower, upper) -> float:
    """``P(lower <= L <= upper)`` for the category counts of a multinomial."""
    q = np.asarray(q, dtype=float)
    lower = np.asarray(lower, dtype=np.int64)
    upper = np.asarray(upper, dtype=np.int64)
    if lower.sum() > T:
        return 0.0
    D = _offsets(T)
    g = np.zeros(T + 1)
    g[0] = 1.0
    for qi, a, b in zip(q, lower, upper):
        K = _transition(T, binomial_table(T, qi))
        K[(D < a) | (D > b)] = 0.0
        g = g @ K
    return float(min(max(g.sum(), 0.0), 1.0))


def max_load_partition(q, T: int) -> np.ndarray:
    """``F[l, j] = P(max load = l and category j is the first to attain it)``.

    Row ``0`` is left at zero. For each ``l`` the categories before ``j``
    are bounded by ``l - 1`` and those after by ``l``; the prefix and
    suffix sweeps are shared across ``j``.
    """
    q = np.asarray(q, dtype=float)
    k = len(q)
    D = _offsets(T)
    Ks = [_transition(T, binomial_table(T, qi)) for qi in q]
    F = np.zeros((T + 1, k))
    for level in range(1, T + 1):
        prefix = np.zeros((k + 1, T + 1))
        prefix[0, 0] = 1.0
        for i in range(k):
            prefix[i + 1] = prefix[i] @ np.where(D <= level - 1, Ks[i], 0.0)
        suffix = np.ones((k + 1, T + 1))
        for i in range(k - 1, -1, -1):
            suffix[i] = np.where(D <= level, Ks[i], 0.0) @ suffix[i + 1]
        width = T + 1 - level
        for j in range(k):
            F[level, j] = np.dot(
                prefix[j, :width] * np.diagonal(Ks[j], level),
                suffix[j + 1, level:],
            )
    np.clip(F, 0.0, 1.0, out=F)
    return F
