"""Monte Carlo engine for static assortments and adaptive policies.

Randomness comes from numpy's Philox4x64 counter-based generator. For a
master seed, stream 0 supplies one uniform per customer for the MNL choice
and stream 1 one spare uniform per customer for randomised policies.
Trajectory ``i`` always consumes row ``i`` of both streams, so its outcome
does not depend on how many trajectories are simulated or on chunking.

A customer offered ``S = {i_1 < ... < i_k}`` picks ``i_r`` when the uniform
falls in the ``r``-th consecutive interval of width ``phi_{i_r}(S)``, and
no product when it falls past the last one.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from os import PathLike
from typing import Iterable, Iterator

import numpy as np

from maxload.errors import DomainError
from maxload.model import Assortment, Instance
from maxload.policy import AdaptivePolicy, StaticPolicy

CHUNK = 1 << 16


@dataclass(frozen=True)
class Trajectory:
    choices: tuple[int, ...]
    offers: tuple[Assortment, ...]
    final_loads: tuple[int, ...]
    max_load: int

    def to_dict(self) -> dict:
        return {
            "choices": list(self.choices),
            "offers": [list(o) for o in self.offers],
            "final_loads": list(self.final_loads),
            "max_load": self.max_load,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Trajectory:
        return cls(
            choices=tuple(d["choices"]),
            offers=tuple(tuple(o) for o in d["offers"]),
            final_loads=tuple(d["final_loads"]),
            max_load=int(d["max_load"]),
        )


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    return (
        np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0]))),
        np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 1]))),
    )


def _cumulative(instance: Instance, offer: Assortment) -> np.ndarray:
    w = np.array([instance.weights[i - 1] for i in offer])
    return np.cumsum(w) / (1.0 + math.fsum(w))


def mnl_choices(instance: Instance, offer: Assortment, u: np.ndarray) -> np.ndarray:
    """Options picked for uniforms ``u`` (0 = no purchase)."""
    if not offer:
        return np.zeros(len(u), dtype=np.int64)
    idx = np.searchsorted(_cumulative(instance, offer), u, side="right")
    table = np.array(list(offer) + [0], dtype=np.int64)
    return table[idx]


def _static_chunks(instance: Instance, S: Assortment, samples: int, seed: int) -> Iterator[np.ndarray]:
    choice_rng, _ = _streams(seed)
    T = instance.T
    k = len(S)
    cum = _cumulative(instance, S) if k else np.zeros(0)
    done = 0
    while done < samples:
        rows = min(CHUNK, samples - done)
        u = choice_rng.random((rows, T))
        pos = np.searchsorted(cum, u, side="right")  # k means no purchase
        counts = np.zeros((rows, k + 1), dtype=np.int64)
        np.add.at(counts, (np.repeat(np.arange(rows), T), pos.ravel()), 1)
        yield counts[:, :k]
        done += rows


def static_max_loads(instance: Instance, S: Iterable[int], samples: int, seed: int) -> np.ndarray:
    S = instance.validate(S)
    if not S:
        return np.zeros(samples, dtype=np.int64)
    return np.concatenate([c.max(axis=1) for c in _static_chunks(instance, S, samples, seed)])


def simulate_static(instance: Instance, S: Iterable[int], seed: int) -> Trajectory:
    return simulate_policy(instance, StaticPolicy(instance.n, instance.validate(S)), seed)


def _group(states: np.ndarray, T: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unique rows, and trajectory indices sorted by group with group boundaries."""
    d = states.shape[1]
    if d * math.log2(T + 2) < 62:
        radix = (T + 2) ** np.arange(d, dtype=np.int64)
        keys = states @ radix
        _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
        uniq = states[first]
    else:
        uniq, inverse = np.unique(states, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(len(uniq) + 1))
    return uniq, order, bounds


def _run_chunk(instance, policy: AdaptivePolicy, u: np.ndarray, aux: np.ndarray, record: bool):
    rows, T = u.shape
    states = np.repeat(policy.initial_state()[None, :], rows, axis=0)
    offers_log = [[] for _ in range(rows)] if record else None
    choices_log = np.zeros((rows, T), dtype=np.int64)
    for step in range(T):
        t = T - step
        uniq, order, bounds = _group(states, T)
        nxt = np.empty_like(states)
        for g, state in enumerate(uniq):
            members = order[bounds[g]:bounds[g + 1]]
            offer = instance.validate(policy.offer(t, tuple(int(x) for x in state)))
            choices = mnl_choices(instance, offer, u[members, step])
            nxt[members] = policy.advance(t, state, offer, choices, aux[members, step])
            choices_log[members, step] = choices
            if record:
                for m in members:
                    offers_log[m].append(offer)
        states = nxt
    return states, choices_log, offers_log


def _policy_chunks(instance: Instance, policy: AdaptivePolicy, samples: int, seed: int, record: bool = False):
    choice_rng, aux_rng = _streams(seed)
    done = 0
    while done < samples:
        rows = min(CHUNK, samples - done)
        u = choice_rng.random((rows, instance.T))
        aux = aux_rng.random((rows, instance.T))
        yield _run_chunk(instance, policy, u, aux, record)
        done += rows


def policy_max_loads(instance: Instance, policy: AdaptivePolicy, samples: int, seed: int) -> np.ndarray:
    if isinstance(policy, StaticPolicy) and type(policy).advance is AdaptivePolicy.advance:
        return static_max_loads(instance, policy.assortment, samples, seed)
    n = instance.n
    return np.concatenate([s[:, :n].max(axis=1) for s, _, _ in _policy_chunks(instance, policy, samples, seed)])


def simulate_policy(instance: Instance, policy: AdaptivePolicy, seed: int) -> Trajectory:
    states, choices, offers = next(_policy_chunks(instance, policy, 1, seed, record=True))
    loads = tuple(int(x) for x in states[0, : instance.n])
    return Trajectory(
        choices=tuple(int(c) for c in choices[0]),
        offers=tuple(offers[0]),
        final_loads=loads,
        max_load=max(loads),
    )


def estimate_policy_value(instance: Instance, policy: AdaptivePolicy, samples: int, seed: int) -> tuple[float, float]:
    """Sample mean and standard error of the final max load."""
    if samples < 2:
        raise DomainError(f"samples must be >= 2, got {samples}")
    loads = policy_max_loads(instance, policy, samples, seed)
    return float(loads.mean()), float(loads.std(ddof=1) / math.sqrt(samples))


def dump_trajectories(trajectories: Iterable[Trajectory], path: str | PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tr in trajectories:
            fh.write(json.dumps(tr.to_dict()) + "\n")


def load_trajectories(path: str | PathLike) -> list[Trajectory]:
    with open(path, encoding="utf-8") as fh:
        return [Trajectory.from_dict(json.loads(line)) for line in fh if line.strip()]
