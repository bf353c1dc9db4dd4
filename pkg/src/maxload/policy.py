"""Adaptive policy interface used by the simulator.

A policy carries an integer state vector per trajectory whose first ``n``
entries are the product loads (original index order). Subclasses may append
private entries, e.g. a simulated shadow trajectory.
"""
from __future__ import annotations

import numpy as np

from maxload.model import Assortment, Instance


class AdaptivePolicy:
    """Base class: a deterministic map from (remaining customers, state) to an offer."""

    def __init__(self, n: int):
        self.n = n

    @property
    def state_dim(self) -> int:
        return self.n

    def initial_state(self) -> np.ndarray:
        return np.zeros(self.state_dim, dtype=np.int64)

    def offer(self, t: int, state: tuple[int, ...]) -> Assortment:
        """Assortment for the next customer when ``t`` customers remain (this one included)."""
        raise NotImplementedError

    def advance(self, t: int, state: np.ndarray, offer: Assortment, choices: np.ndarray, aux: np.ndarray) -> np.ndarray:
        """Next states for a batch sharing ``state`` and ``offer``.

        ``choices`` holds the realised option per trajectory (0 = no purchase)
        and ``aux`` one spare uniform per trajectory for randomised policies.
        """
        nxt = np.repeat(state[None, :], len(choices), axis=0)
        bought = choices > 0
        nxt[np.nonzero(bought)[0], choices[bought] - 1] += 1
        return nxt


class StaticPolicy(AdaptivePolicy):
    """Offers the same assortment to every customer."""

    def __init__(self, n: int, assortment: Assortment):
        super().__init__(n)
        self.assortment = tuple(sorted(assortment))

    def offer(self, t, state):
        return self.assortment

    def __repr__(self):
        return f"StaticPolicy({list(self.assortment)})"


def heaviest_product_policy(instance: Instance) -> StaticPolicy:
    return StaticPolicy(instance.n, (instance.order[0],))


def full_universe_policy(instance: Instance) -> StaticPolicy:
    return StaticPolicy(instance.n, tuple(range(1, instance.n + 1)))
