"""MNL universes with their choice probabilities and instance files.

Products are numbered ``1..n`` in every public interface; ``0`` is the
no-purchase option, whose preference weight is fixed at 1 and never stored.
An assortment is a sorted tuple of product indices.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from os import PathLike
from typing import Iterable, Sequence

import numpy as np

from maxload.errors import DomainError, InstanceFormatError

NO_PURCHASE = 0

Assortment = tuple[int, ...]


@dataclass(frozen=True)
class Instance:
    """A universe of ``n`` products with preference weights and ``T`` customers.

    ``weights`` keeps the caller's order. ``order`` is the canonical
    permutation: ``order[p]`` is the original index of the product ranked
    ``p + 1`` by non-increasing weight (ties broken by original index).
    """

    T: int
    weights: tuple[float, ...]
    label: str | None = None
    order: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        weights = tuple(float(w) for w in self.weights)
        object.__setattr__(self, "weights", weights)
        if isinstance(self.T, bool) or not isinstance(self.T, (int, np.integer)):
            raise DomainError(f"T must be an integer, got {self.T!r}")
        object.__setattr__(self, "T", int(self.T))
        if self.T < 1:
            raise DomainError(f"T must be >= 1, got {self.T}")
        if not weights:
            raise DomainError("an instance needs at least one product")
        for i, w in enumerate(weights, start=1):
            if not (math.isfinite(w) and w > 0.0):
                raise DomainError(f"weight of product {i} must be finite and > 0, got {w!r}")
        order = sorted(range(1, len(weights) + 1), key=lambda i: (-weights[i - 1], i))
        object.__setattr__(self, "order", tuple(order))

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def sorted_weights(self) -> tuple[float, ...]:
        return tuple(self.weights[i - 1] for i in self.order)

    def weight(self, i: int) -> float:
        return self.weights[i - 1]

    def assortment_weights(self, S: Iterable[int]) -> list[float]:
        """Weights of ``S`` in non-increasing order (ties by index)."""
        S = self.validate(S)
        return [self.weights[i - 1] for i in sorted(S, key=lambda i: (-self.weights[i - 1], i))]

    def validate(self, S: Iterable[int]) -> Assortment:
        return make_assortment(S, self.n)

    def with_T(self, T: int) -> Instance:
        return Instance(T=T, weights=self.weights, label=self.label)

    def restrict(self, products: Iterable[int]) -> Instance:
        """Sub-universe on ``products``, renumbered ``1..k`` in the given order."""
        products = list(products)
        if not products:
            raise DomainError("cannot restrict to an empty universe")
        make_assortment(products, self.n)
        return Instance(T=self.T, weights=[self.weights[i - 1] for i in products], label=self.label)

    def weight_groups(self) -> list[list[int]]:
        """Original indices grouped by identical weight, heaviest group first."""
        groups: list[list[int]] = []
        prev = None
        for i in self.order:
            w = self.weights[i - 1]
            if prev is None or w != prev:
                groups.append([])
                prev = w
            groups[-1].append(i)
        return groups

    def to_dict(self) -> dict:
        d = {"n": self.n, "T": self.T, "weights": list(self.weights)}
        if self.label is not None:
            d["label"] = self.label
        return d


def make_assortment(S: Iterable[int], n: int) -> Assortment:
    members = []
    for i in S:
        if isinstance(i, bool) or not isinstance(i, (int, np.integer)):
            raise DomainError(f"product index must be an integer, got {i!r}")
        i = int(i)
        if not 1 <= i <= n:
            raise DomainError(f"product index {i} outside 1..{n}")
        members.append(i)
    out = tuple(sorted(set(members)))
    if len(out) != len(members):
        raise DomainError(f"duplicate product index in {members}")
    return out


def choice_probability(weights: Sequence[float], i: int) -> float:
    """MNL probability of option ``i`` when the products weighted ``weights`` are offered.

    ``i`` is a 1-based position in ``weights`` or :data:`NO_PURCHASE`.
    """
    total = 1.0 + math.fsum(weights)
    if i == NO_PURCHASE:
        return 1.0 / total
    if not 1 <= i <= len(weights):
        raise DomainError(f"option {i} is not in the offered assortment of size {len(weights)}")
    return weights[i - 1] / total


def choice_probabilities(weights: Sequence[float]) -> np.ndarray:
    """Vector ``(phi_0, phi_1, ..., phi_k)`` for the offered weights."""
    w = np.asarray(weights, dtype=float)
    total = 1.0 + math.fsum(w)
    return np.concatenate(([1.0 / total], w / total))


def generate_instance(n: int, T: int, mu: float, sigma: float, seed: int, label: str | None = None) -> Instance:
    """Draw ``n`` weights i.i.d. from Normal(mu, sigma), redrawing non-positive values."""
    if n < 1 or T < 1:
        raise DomainError(f"need n >= 1 and T >= 1, got n={n}, T={T}")
    if not mu > 0:
        raise DomainError(f"mu must be > 0, got {mu}")
    if sigma < 0:
        raise DomainError(f"sigma must be >= 0, got {sigma}")
    rng = np.random.default_rng(seed)
    weights = rng.normal(mu, sigma, size=n)
    bad = weights <= 0
    while bad.any():
        weights[bad] = rng.normal(mu, sigma, size=int(bad.sum()))
        bad = weights <= 0
    return Instance(T=T, weights=tuple(weights.tolist()), label=label)


def instance_from_dict(doc) -> Instance:
    if not isinstance(doc, dict):
        raise InstanceFormatError("<root>", "expected a JSON object")
    for key in ("n", "T", "weights"):
        if key not in doc:
            raise InstanceFormatError(key, "missing")
    n, T, weights = doc["n"], doc["T"], doc["weights"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise InstanceFormatError("n", f"expected a positive integer, got {n!r}")
    if isinstance(T, bool) or not isinstance(T, int) or T < 1:
        raise InstanceFormatError("T", f"expected a positive integer, got {T!r}")
    if not isinstance(weights, list):
        raise InstanceFormatError("weights", "expected a list of numbers")
    if len(weights) != n:
        raise InstanceFormatError("weights", f"length {len(weights)} does not match n={n}")
    for k, w in enumerate(weights):
        if isinstance(w, bool) or not isinstance(w, (int, float)):
            raise InstanceFormatError(f"weights[{k}]", f"expected a number, got {w!r}")
        if not (math.isfinite(w) and w > 0):
            raise InstanceFormatError(f"weights[{k}]", f"must be finite and > 0, got {w!r}")
    label = doc.get("label")
    if label is not None and not isinstance(label, str):
        raise InstanceFormatError("label", "expected a string")
    return Instance(T=T, weights=tuple(float(w) for w in weights), label=label)


def load_instance(path: str | PathLike) -> Instance:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceFormatError("<root>", f"malformed JSON: {exc}") from exc
    return instance_from_dict(doc)


def save_instance(instance: Instance, path: str | PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance.to_dict(), fh, indent=2)
        fh.write("\n")
