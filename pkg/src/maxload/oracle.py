"""Exact evaluation of the expected maximum load of a static assortment.

``P(M = l)`` for ``l >= 1`` is the sum over products ``j`` of the
rectangular event "products before ``j`` stay below ``l``, ``j`` hits
``l``, products after ``j`` stay at or below ``l``". ``P(M = 0)`` is the
probability that every customer walks away.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from maxload import kernels
from maxload.errors import CapExceededError, DomainError, InvariantViolation
from maxload.model import Instance

BRUTE_FORCE_CAP = 10**7
PMF_SUM_TOL = 1e-9


@dataclass(frozen=True)
class RectangularQuery:
    """Event ``lower <= L <= upper`` for ``L ~ Multinomial(T, probs)``.

    The remainder category ``p_0 = 1 - sum(probs)`` is unconstrained.
    """

    T: int
    probs: tuple[float, ...]
    lower: tuple[int, ...]
    upper: tuple[int, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        lower = tuple(int(a) for a in self.lower)
        upper = tuple(int(b) for b in self.upper)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if self.T < 0:
            raise DomainError(f"T must be >= 0, got {self.T}")
        if not (len(probs) == len(lower) == len(upper)):
            raise DomainError("probs and bounds must have equal length")
        if any(p < 0 or not math.isfinite(p) for p in probs):
            raise DomainError(f"probabilities must be finite and >= 0: {probs}")
        if math.fsum(probs) > 1 + 1e-12:
            raise DomainError(f"probabilities sum to {math.fsum(probs)} > 1")
        for a, b in zip(lower, upper):
            if not 0 <= a <= b <= self.T:
                raise DomainError(f"bounds must satisfy 0 <= a <= b <= T, got a={a}, b={b}, T={self.T}")


@dataclass(frozen=True)
class MaxLoadDistribution:
    pmf: np.ndarray

    @property
    def T(self) -> int:
        return len(self.pmf) - 1

    def mean(self) -> float:
        return math.fsum(float(l) * p for l, p in enumerate(self.pmf))


def conditional_probabilities(probs: Sequence[float]) -> np.ndarray:
    """Chain-of-binomials success probabilities ``p_i / (p_0 + p_i + ... + p_k)``."""
    p = np.asarray(probs, dtype=float)
    remainder = max(0.0, 1.0 - math.fsum(p))
    tail = np.array([remainder + math.fsum(p[i:]) for i in range(len(p))])
    with np.errstate(invalid="ignore", divide="ignore"):
        q = np.where(tail > 0, p / np.where(tail > 0, tail, 1.0), 0.0)
    return np.clip(q, 0.0, 1.0)


def _conditional_from_weights(weights: Sequence[float]) -> np.ndarray:
    # v_i / (1 + v_i + ... + v_k), computed from weights to avoid cancellation
    w = [float(v) for v in weights]
    return np.array([w[i] / (1.0 + math.fsum(w[i:])) for i in range(len(w))])


def multinomial_pmf(T: int, probs: Sequence[float], counts: Sequence[int]) -> float:
    """``P(L = counts)``; the remainder category absorbs ``T - sum(counts)`` trials."""
    counts = [int(c) for c in counts]
    if len(counts) != len(probs):
        raise DomainError("counts and probs must have equal length")
    if any(c < 0 for c in counts):
        raise DomainError(f"negative count in {counts}")
    rest = T - sum(counts)
    if rest < 0:
        raise DomainError(f"counts sum to {sum(counts)} > T={T}")
    p0 = max(0.0, 1.0 - math.fsum(probs))
    log_mass = math.lgamma(T + 1)
    for c, p in zip(list(counts) + [rest], list(probs) + [p0]):
        if c == 0:
            continue
        if p <= 0:
            return 0.0
        log_mass += c * math.log(p) - math.lgamma(c + 1)
    return math.exp(log_mass)


def rectangular_probability(query: RectangularQuery) -> float:
    if sum(query.lower) > query.T:
        return 0.0
    if not query.probs:
        return 1.0
    q = conditional_probabilities(query.probs)
    return kernels.rectangular_probability(q, query.T, np.array(query.lower), np.array(query.upper))


def partition_matrix(weights: Sequence[float], T: int) -> np.ndarray:
    """``F[l, j-1] = P(M = l, product j is the lowest-index product with load l)``.

    Products are taken in the order given.
    """
    return kernels.max_load_partition(_conditional_from_weights(weights), T)


def max_load_distribution_weights(weights: Sequence[float], T: int) -> MaxLoadDistribution:
    weights = list(weights)
    if not weights:
        raise DomainError("the max-load distribution of the empty assortment is the point mass at 0")
    # heaviest first keeps the chain's conditional probabilities well scaled
    weights.sort(reverse=True)
    pmf = partition_matrix(weights, T).sum(axis=1)
    pmf[0] = (1.0 / (1.0 + math.fsum(weights))) ** T
    np.clip(pmf, 0.0, 1.0, out=pmf)
    total = math.fsum(pmf)
    if abs(total - 1.0) > PMF_SUM_TOL:
        raise InvariantViolation(f"max-load pmf sums to {total!r}")
    return MaxLoadDistribution(pmf)


def max_load_distribution(instance: Instance, S: Iterable[int]) -> MaxLoadDistribution:
    return max_load_distribution_weights(instance.assortment_weights(S), instance.T)


def expected_max_load_weights(weights: Sequence[float], T: int) -> float:
    if len(weights) == 0:
        return 0.0
    return max_load_distribution_weights(weights, T).mean()


def expected_max_load(instance: Instance, S: Iterable[int]) -> float:
    return expected_max_load_weights(instance.assortment_weights(S), instance.T)


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def brute_force_expected_max_load_weights(weights: Sequence[float], T: int, cap: int = BRUTE_FORCE_CAP) -> float:
    """Sum of ``P(L = l) * max(l)`` over every load vector, with exact integer coefficients."""
    k = len(weights)
    if k == 0:
        return 0.0
    terms = math.comb(T + k, k)
    if terms > cap:
        raise CapExceededError(
            f"brute force needs {terms} terms (cap {cap}); use expected_max_load instead"
        )
    total = 1.0 + math.fsum(weights)
    phi = [1.0 / total] + [w / total for w in weights]
    fact_T = math.factorial(T)
    acc = []
    for loads in _compositions(T, k + 1):
        top = max(loads[1:])
        if top == 0:
            continue
        coef = fact_T
        for c in loads:
            coef //= math.factorial(c)
        acc.append(top * float(coef) * math.prod(p**c for p, c in zip(phi, loads)))
    return math.fsum(acc)


def brute_force_expected_max_load(instance: Instance, S: Iterable[int], cap: int = BRUTE_FORCE_CAP) -> float:
    return brute_force_expected_max_load_weights(instance.assortment_weights(S), instance.T, cap)


def brute_force_multinomial_max(T: int, probs: Sequence[float]) -> float:
    """``E(max_i L_i)`` over the listed categories of a multinomial, by enumeration."""
    k = len(probs)
    if k == 0:
        return 0.0
    acc = []
    for loads in itertools.product(range(T + 1), repeat=k):
        if sum(loads) <= T:
            acc.append(max(loads) * multinomial_pmf(T, probs, loads))
    return math.fsum(acc)


def monte_carlo_expected_max_load(instance: Instance, S: Iterable[int], samples: int, seed: int) -> tuple[float, float]:
    """Sample mean and standard error of the max load over simulated customer streams."""
    from maxload.simulate import static_max_loads

    S = instance.validate(S)
    if samples < 1:
        raise DomainError(f"samples must be >= 1, got {samples}")
    if not S:
        return 0.0, 0.0
    loads = static_max_loads(instance, S, samples, seed)
    mean = float(loads.mean())
    stderr = float(loads.std(ddof=1) / math.sqrt(samples)) if samples > 1 else math.nan
    return mean, stderr
