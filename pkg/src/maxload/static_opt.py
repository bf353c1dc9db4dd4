"""Static assortment solvers and the Merge/Transfer weight operations.

Solvers work on the canonical (weight-sorted) ranking of the instance and
report assortments in original product indices. Among assortments with
equal value the one whose membership vector over ``1..n`` (index 1 first)
is lexicographically smallest wins.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from maxload.errors import CapExceededError, DomainError
from maxload.model import Assortment, Instance
from maxload.oracle import expected_max_load

EXACT_MAX_CANDIDATES = 2**16
BOUNDARY_RTOL = 1e-12


@dataclass(frozen=True)
class StaticSolveReport:
    assortment: Assortment
    value: float
    method: str
    candidates_evaluated: int
    wall_time: float
    epsilon: float | None = None
    notes: tuple[str, ...] = field(default=())

    @property
    def size(self) -> int:
        return len(self.assortment)

    def to_dict(self) -> dict:
        d = {
            "method": self.method,
            "assortment": list(self.assortment),
            "size": self.size,
            "value": self.value,
            "candidates_evaluated": self.candidates_evaluated,
            "wall_time": self.wall_time,
        }
        if self.epsilon is not None:
            d["epsilon"] = self.epsilon
        if self.notes:
            d["notes"] = list(self.notes)
        return d


def membership_vector(S: Sequence[int], n: int) -> tuple[int, ...]:
    members = set(S)
    return tuple(int(i in members) for i in range(1, n + 1))


class _Best:
    """Running argmax with the lexicographic tie-break."""

    def __init__(self, n: int):
        self.n = n
        self.value = -math.inf
        self.assortment: Assortment = ()
        self.evaluated = 0

    def offer(self, instance: Instance, S: Assortment) -> None:
        value = expected_max_load(instance, S)
        self.evaluated += 1
        if value > self.value or (
            value == self.value
            and membership_vector(S, self.n) < membership_vector(self.assortment, self.n)
        ):
            self.value, self.assortment = value, S


def exact_solve(instance: Instance, max_candidates: int = EXACT_MAX_CANDIDATES) -> StaticSolveReport:
    """Optimal static assortment by enumeration.

    Products of identical weight are interchangeable, so only the number
    taken from each weight group is enumerated; with distinct weights this
    is all ``2^n - 1`` non-empty subsets.
    """
    start = time.perf_counter()
    groups = instance.weight_groups()
    count = math.prod(len(g) + 1 for g in groups) - 1
    if count > max_candidates:
        raise CapExceededError(
            f"exhaustive search needs {count} candidates (cap {max_candidates}); "
            "use the weight-ordered or PTAS solver"
        )
    best = _Best(instance.n)
    # within a group, the highest original indices give the smallest membership vector
    pools = [sorted(g, reverse=True) for g in groups]
    for takes in itertools.product(*(range(len(g) + 1) for g in groups)):
        if not any(takes):
            continue
        S = tuple(sorted(i for pool, c in zip(pools, takes) for i in pool[:c]))
        best.offer(instance, S)
    return StaticSolveReport(best.assortment, best.value, "exact", best.evaluated, time.perf_counter() - start)


def best_weight_ordered(instance: Instance) -> StaticSolveReport:
    """Best prefix of the products sorted by non-increasing weight."""
    start = time.perf_counter()
    best_value, best_S = -math.inf, ()
    for j in range(1, instance.n + 1):
        S = tuple(sorted(instance.order[:j]))
        value = expected_max_load(instance, S)
        if value > best_value:
            best_value, best_S = value, S
    return StaticSolveReport(best_S, best_value, "weight-ordered", instance.n, time.perf_counter() - start)


def effective_epsilon(epsilon: float) -> tuple[int, float]:
    """Round ``1/epsilon`` up to an integer ``K``; returns ``(K, 1/K)``."""
    if not 0 < epsilon <= 1:
        raise DomainError(f"epsilon must lie in (0, 1], got {epsilon}")
    K = math.ceil(1.0 / epsilon - 1e-9)
    return K, 1.0 / K


def grid_classes(weights: Sequence[float], start: int, epsilon: float) -> list[list[int]]:
    """Multiplicative grid classes of ranks ``start..n`` relative to ``v_start``.

    ``weights[r - 1]`` is the weight of rank ``r`` (non-increasing). Class
    ``l`` holds weights in ``[(1-eps)^l v_c, (1-eps)^(l-1) v_c)``, class 1
    closed on the right; weights below ``eps * v_c`` belong to no class.
    """
    vc = weights[start - 1]
    # boundaries carry a relative slack so that e.g. 0.6 counts as 0.75 * 0.8
    shrink = 1 - BOUNDARY_RTOL
    classes: dict[int, list[int]] = {}
    for r in range(start, len(weights) + 1):
        w = weights[r - 1]
        if w < epsilon * vc * shrink:
            continue
        level = 1
        while w < (1 - epsilon) ** level * vc * shrink:
            level += 1
        classes.setdefault(level, []).append(r)
    return [classes[l] for l in sorted(classes)]


def _block_family_ranks(n: int, weights: Sequence[float], K: int, epsilon: float) -> Iterator[tuple[int, ...]]:
    for size in range(1, min(K, n) + 1):
        yield from itertools.combinations(range(1, n + 1), size)
    if n <= K:
        return
    for S1 in itertools.combinations(range(1, n + 1), K):
        a = S1[-1]
        for b in range(a, n + 1):
            head = S1 + tuple(range(a + 1, b + 1))
            c = b + 1
            if c > n:
                yield head
                continue
            # within a class take the N lightest (largest ranks)
            options = [
                [tuple(cls[len(cls) - N:]) if N else () for N in range(len(cls) + 1)]
                for cls in grid_classes(weights, c, epsilon)
            ]
            for picks in itertools.product(*options):
                yield head + tuple(r for p in picks for r in p)


def enumerate_block_based(instance: Instance, epsilon: float) -> Iterator[Assortment]:
    """Every block-based assortment once, in original indices."""
    K, eps = effective_epsilon(epsilon)
    weights = instance.sorted_weights
    seen: set[frozenset[int]] = set()
    for ranks in _block_family_ranks(instance.n, weights, K, eps):
        key = frozenset(ranks)
        if key in seen:
            continue
        seen.add(key)
        yield tuple(sorted(instance.order[r - 1] for r in ranks))


def ptas_solve(instance: Instance, epsilon: float) -> StaticSolveReport:
    start = time.perf_counter()
    K, eps = effective_epsilon(epsilon)
    best = _Best(instance.n)
    for S in enumerate_block_based(instance, eps):
        best.offer(instance, S)
    notes = () if math.isclose(eps, epsilon) else (f"epsilon rounded from {epsilon} to 1/{K}",)
    return StaticSolveReport(
        best.assortment, best.value, "ptas", best.evaluated, time.perf_counter() - start, epsilon=eps, notes=notes
    )


def _check_virtual(weights: Sequence[float]) -> tuple[float, ...]:
    w = tuple(float(x) for x in weights)
    if any(not (math.isfinite(x) and x > 0) for x in w):
        raise DomainError(f"virtual weights must be finite and > 0: {w}")
    return w


def merge(weights: Sequence[float], i: int, j: int) -> tuple[float, ...]:
    """Replace positions ``i`` and ``j`` (0-based) by one product of weight ``v_i + v_j``."""
    w = _check_virtual(weights)
    if i == j or not (0 <= i < len(w) and 0 <= j < len(w)):
        raise DomainError(f"merge needs two distinct positions in 0..{len(w) - 1}, got {i}, {j}")
    lo, hi = min(i, j), max(i, j)
    out = list(w)
    out[lo] = w[i] + w[j]
    del out[hi]
    return tuple(out)


def transfer(weights: Sequence[float], from_j: int, to_i: int, delta: float) -> tuple[float, ...]:
    """Move ``delta`` weight from position ``from_j`` to the heavier position ``to_i``.

    A product left with zero weight is removed.
    """
    w = _check_virtual(weights)
    if from_j == to_i or not (0 <= from_j < len(w) and 0 <= to_i < len(w)):
        raise DomainError(f"transfer needs two distinct positions in 0..{len(w) - 1}")
    if w[to_i] < w[from_j]:
        raise DomainError(f"weight may only move to a heavier product ({w[to_i]} < {w[from_j]})")
    if not 0 <= delta <= w[from_j]:
        raise DomainError(f"delta must lie in [0, {w[from_j]}], got {delta}")
    out = list(w)
    out[to_i] = w[to_i] + delta
    out[from_j] = w[from_j] - delta
    if out[from_j] == 0:
        del out[from_j]
    return tuple(out)
