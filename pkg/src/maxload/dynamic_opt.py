"""Dynamic (personalised) assortment policies.

Two solvers live here. :func:`exact_dp` runs the full value-function
recursion over load vectors. The truncated pipeline (:func:`solve_dynamic`)
first discards light products and snaps the rest onto a geometric weight
grid. A reduced recursion over bucket/load counts, with loads capped at
``beta``, then yields a policy that is coupled back onto the true weights.
"""
from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from maxload.errors import CapExceededError, DomainError, InvariantViolation
from maxload.model import Assortment, Instance
from maxload.policy import AdaptivePolicy, StaticPolicy, full_universe_policy, heaviest_product_policy
from maxload.static_opt import best_weight_ordered, exact_solve

EXACT_DP_STATE_CAP = 5_000_000
REDUCED_DP_STATE_CAP = 2_000_000
PRICE_CLAMP = 1e-12
TIGHTNESS_SLACK = 1e-12
GAP_TOL = 1e-9


# ---------------------------------------------------------------- inner step


def dp_inner_step(prices: Sequence[float], weights: Sequence[float]) -> tuple[float, Assortment]:
    """Maximise ``sum_{i in S} r_i v_i / (1 + v(S))`` over assortments.

    Scans prefixes of the products ordered by decreasing price (ties by
    position) and keeps the first prefix reaching the best value, so ties
    resolve toward the smaller set. Positions in the result are 1-based.
    """
    if len(prices) != len(weights):
        raise DomainError(f"{len(prices)} prices for {len(weights)} weights")
    for i, (r, v) in enumerate(zip(prices, weights), start=1):
        if not (math.isfinite(r) and r >= 0):
            raise DomainError(f"price of position {i} must be finite and >= 0, got {r}")
        if not (math.isfinite(v) and v > 0):
            raise DomainError(f"weight of position {i} must be finite and > 0, got {v}")
    ranked = sorted(range(len(prices)), key=lambda i: -prices[i])
    num, den = 0.0, 1.0
    best, cut = 0.0, 0
    for k, i in enumerate(ranked, start=1):
        num += prices[i] * weights[i]
        den += weights[i]
        value = num / den
        if value > best:
            best, cut = value, k
    return best, tuple(sorted(i + 1 for i in ranked[:cut]))


def _clamp(r: float) -> float:
    if r < 0:
        if r < -PRICE_CLAMP:
            raise InvariantViolation(f"value function decreased by {-r} after a sale")
        return 0.0
    return r


def _deep(T: int) -> None:
    need = 4 * T + 200
    if sys.getrecursionlimit() < need:
        sys.setrecursionlimit(need)


# ---------------------------------------------------------------- exact DP


@dataclass
class ExactDpTable:
    """Values and optimal actions keyed by ``(t, canonical loads)``.

    A canonical key lists loads by weight rank, sorted descending inside
    each group of equal-weight products. Actions are canonical slots
    (0-based ranks).
    """

    instance: Instance
    values: dict[int, dict[tuple[int, ...], float]]
    actions: dict[int, dict[tuple[int, ...], tuple[int, ...]]]

    @property
    def value(self) -> float:
        return self.values[self.instance.T][(0,) * self.instance.n]

    def canonicalize(self, loads: Sequence[int]) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Canonical key and the original product sitting in each slot."""
        slots: list[int] = []
        for group in self.instance.weight_groups():
            slots.extend(sorted(group, key=lambda i: (-loads[i - 1], i)))
        return tuple(int(loads[i - 1]) for i in slots), tuple(slots)

    def lookup(self, t: int, loads: Sequence[int]) -> float:
        return self.values[t][self.canonicalize(loads)[0]]

    def action(self, t: int, loads: Sequence[int]) -> Assortment | None:
        key, slots = self.canonicalize(loads)
        chosen = self.actions.get(t, {}).get(key)
        if chosen is None:
            return None
        return tuple(sorted(slots[s] for s in chosen))

    def __len__(self) -> int:
        return sum(len(level) for level in self.values.values())


def exact_state_bound(instance: Instance) -> int:
    """Upper bound on canonical states per level, times ``T``."""
    T, n = instance.T, instance.n
    per_group = math.prod(math.comb(T + len(g), len(g)) for g in instance.weight_groups())
    return min(math.comb(T + n, n), per_group) * T


def exact_dp(instance: Instance, state_cap: int = EXACT_DP_STATE_CAP) -> tuple[float, ExactDpTable]:
    bound = exact_state_bound(instance)
    if bound > state_cap:
        raise CapExceededError(
            f"exact DP would visit up to {bound} states (cap {state_cap}); use the truncated solver"
        )
    _deep(instance.T)
    weights = instance.sorted_weights
    spans = []
    start = 0
    for g in instance.weight_groups():
        spans.append((start, start + len(g)))
        start += len(g)
    values: dict[int, dict] = {t: {} for t in range(instance.T + 1)}
    actions: dict[int, dict] = {t: {} for t in range(1, instance.T + 1)}

    def child(key, lo, hi, m):
        for s in range(lo, hi):
            if key[s] == m:
                return key[:s] + (m + 1,) + key[s + 1:]
        raise AssertionError("load not present in group")

    def solve(t, key):
        memo = values[t]
        if key in memo:
            return memo[key]
        if t == 0:
            memo[key] = float(max(key))
            return memo[key]
        base = solve(t - 1, key)
        prices = [0.0] * len(key)
        for lo, hi in spans:
            cache = {}
            for s in range(lo, hi):
                m = key[s]
                if m not in cache:
                    cache[m] = _clamp(solve(t - 1, child(key, lo, hi, m)) - base)
                prices[s] = cache[m]
        gain, chosen = dp_inner_step(prices, weights)
        memo[key] = base + gain
        actions[t][key] = tuple(p - 1 for p in chosen)
        return memo[key]

    value = solve(instance.T, (0,) * instance.n)
    return value, ExactDpTable(instance, values, actions)


class ExactDpPolicy(AdaptivePolicy):
    """Plays the optimal action stored in an exact DP table; unknown states get ``()``."""

    def __init__(self, table: ExactDpTable):
        super().__init__(table.instance.n)
        self.table = table

    def offer(self, t, state):
        chosen = self.table.action(t, state[: self.n])
        return () if chosen is None else chosen


# ---------------------------------------------------------------- regimes


@dataclass(frozen=True)
class TruncationParams:
    epsilon: float
    alpha: float
    tau: float
    beta: int
    light_cutoff: float
    large_T_guard: float
    high_threshold: float
    regime: str
    tau_overridden: bool = False
    beta_overridden: bool = False
    regime_forced: bool = False

    def __post_init__(self):
        if self.beta < 1 or not self.tau > 0:
            raise DomainError(f"need beta >= 1 and tau > 0, got beta={self.beta}, tau={self.tau}")
        if self.regime not in ("high", "low"):
            raise DomainError(f"regime must be 'high' or 'low', got {self.regime!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def classify_regime(
    instance: Instance,
    epsilon: float,
    *,
    override_tau: float | None = None,
    override_beta: int | None = None,
    force_regime: str | None = None,
) -> TruncationParams:
    """Thresholds of the truncated pipeline and the High/Low verdict.

    ``ln(nT)`` is evaluated at ``max(nT, 2)`` so that a single product with
    a single customer still gets a positive ``tau``.
    """
    if not 0 < epsilon < 1:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    n, T = instance.n, instance.T
    vmax = max(instance.weights)
    alpha = vmax / (1 + vmax)
    log_nT = math.log(max(n * T, 2))
    high_threshold = 12 * log_nT / epsilon**3
    regime = "high" if (T * alpha >= high_threshold or vmax >= 1 / epsilon) else "low"
    if force_regime is not None:
        regime = force_regime
    tau = float(override_tau) if override_tau is not None else 300 * log_nT**2 / epsilon**6
    if override_beta is not None:
        beta = int(override_beta)
    else:
        beta = math.ceil(tau / epsilon - 1e-9)
    return TruncationParams(
        epsilon=epsilon,
        alpha=alpha,
        tau=tau,
        beta=beta,
        light_cutoff=epsilon**2 * vmax / n,
        large_T_guard=576 * n**3 / epsilon**8,
        high_threshold=high_threshold,
        regime=regime,
        tau_overridden=override_tau is not None,
        beta_overridden=override_beta is not None,
        regime_forced=force_regime is not None,
    )


# ---------------------------------------------------------------- weight classes


@dataclass(frozen=True)
class WeightClassing:
    """Surviving products and their left-endpoint rounded weights.

    ``kept`` lists original indices ascending; the rounded universe numbers
    them ``1..k`` in that order.
    """

    epsilon: float
    n: int
    kept: tuple[int, ...]
    true_weights: tuple[float, ...]
    buckets: tuple[int, ...]
    v_min: float
    v_max: float
    J: int

    @property
    def k(self) -> int:
        return len(self.kept)

    def bucket_weight(self, j: int) -> float:
        return self.v_min * (1 + self.epsilon) ** j

    @property
    def rounded_weights(self) -> tuple[float, ...]:
        return tuple(self.bucket_weight(j) for j in self.buckets)

    @property
    def dropped(self) -> tuple[int, ...]:
        kept = set(self.kept)
        return tuple(i for i in range(1, self.n + 1) if i not in kept)

    def rounded_instance(self, T: int) -> Instance:
        return Instance(T=T, weights=self.rounded_weights)

    def position(self) -> dict[int, int]:
        """Original index to 1-based rounded-universe position."""
        return {i: p for p, i in enumerate(self.kept, start=1)}

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("kept", "true_weights", "buckets"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> WeightClassing:
        return cls(
            epsilon=float(d["epsilon"]),
            n=int(d["n"]),
            kept=tuple(d["kept"]),
            true_weights=tuple(float(x) for x in d["true_weights"]),
            buckets=tuple(d["buckets"]),
            v_min=float(d["v_min"]),
            v_max=float(d["v_max"]),
            J=int(d["J"]),
        )


def _bucket(v: float, v_min: float, epsilon: float) -> int:
    base = 1 + epsilon
    j = max(0, math.floor(math.log(v / v_min) / math.log(base)))
    # repair floating-point slips so that v_min * base**j <= v < v_min * base**(j+1)
    while v_min * base ** (j + 1) <= v:
        j += 1
    while j > 0 and v_min * base**j > v:
        j -= 1
    return j


def build_classing(instance: Instance, epsilon: float, light_cutoff: float) -> WeightClassing:
    kept = tuple(i for i in range(1, instance.n + 1) if instance.weights[i - 1] > light_cutoff)
    if not kept:
        raise DomainError(f"every product is at or below the light cutoff {light_cutoff}")
    w = tuple(instance.weights[i - 1] for i in kept)
    v_min, v_max = min(w), max(w)
    buckets = tuple(_bucket(v, v_min, epsilon) for v in w)
    classing = WeightClassing(epsilon, instance.n, kept, w, buckets, v_min, v_max, _bucket(v_max, v_min, epsilon))
    for v, r in zip(w, classing.rounded_weights):
        if not (1 - epsilon) * v <= r <= v:
            raise InvariantViolation(f"rounded weight {r} outside [(1-eps)v, v] for v={v}")
    return classing


# ---------------------------------------------------------------- compressed states


@dataclass(frozen=True)
class CompressedState:
    """Counts ``N[j][m]`` of rounded products in bucket ``j`` carrying load ``m``."""

    t: int
    counts: tuple[tuple[int, ...], ...]

    @property
    def max_load(self) -> int:
        return max((m for row in self.counts for m, c in enumerate(row) if c), default=0)

    def flat(self) -> tuple[int, ...]:
        return tuple(c for row in self.counts for c in row)


def compress(t: int, loads: Sequence[int], classing: WeightClassing, cap: int) -> CompressedState:
    """``loads`` are indexed by rounded-universe position; ``cap`` is the top load index."""
    counts = [[0] * (cap + 1) for _ in range(classing.J + 1)]
    for j, m in zip(classing.buckets, loads):
        if not 0 <= m <= cap:
            raise DomainError(f"load {m} outside 0..{cap}")
        counts[j][int(m)] += 1
    return CompressedState(t, tuple(tuple(r) for r in counts))


def expand(state: CompressedState, classing: WeightClassing) -> tuple[int, ...]:
    """Representative loads: within a bucket, lower positions get the higher loads."""
    loads = [0] * classing.k
    for j, row in enumerate(state.counts):
        members = [p for p, b in enumerate(classing.buckets) if b == j]
        it = iter(members)
        for m in range(len(row) - 1, -1, -1):
            for _ in range(row[m]):
                try:
                    loads[next(it)] = m
                except StopIteration:
                    raise DomainError(f"bucket {j} holds more products than exist") from None
        if next(it, None) is not None:
            raise DomainError(f"counts of bucket {j} do not cover its {len(members)} products")
    return tuple(loads)


# ---------------------------------------------------------------- reduced DP


@dataclass
class ReducedDpTable:
    """Values and actions of the reduced recursion, keyed by ``(t, flattened counts)``.

    An action is a tuple of ``(bucket, load)`` cells offered in full.
    """

    classing: WeightClassing
    T: int
    beta: int
    values: dict[int, dict[tuple[int, ...], float]]
    actions: dict[int, dict[tuple[int, ...], tuple[tuple[int, int], ...]]]

    @property
    def cap(self) -> int:
        return min(self.beta, self.T)

    @property
    def value(self) -> float:
        start = compress(self.T, (0,) * self.classing.k, self.classing, self.cap)
        return self.values[self.T][start.flat()]

    def __len__(self) -> int:
        return sum(len(level) for level in self.values.values())


def reduced_dp(classing: WeightClassing, T: int, beta: int, state_cap: int = REDUCED_DP_STATE_CAP) -> ReducedDpTable:
    _deep(T)
    cap = min(beta, T)
    width = cap + 1
    bw = [classing.bucket_weight(j) for j in range(classing.J + 1)]
    values: dict[int, dict] = {t: {} for t in range(T + 1)}
    actions: dict[int, dict] = {t: {} for t in range(1, T + 1)}
    stored = [0]

    def top(key):
        return max(i % width for i, c in enumerate(key) if c)

    def solve(t, key):
        memo = values[t]
        if key in memo:
            return memo[key]
        stored[0] += 1
        if stored[0] > state_cap:
            raise CapExceededError(f"reduced DP exceeded {state_cap} compressed states")
        mx = top(key)
        if mx >= beta:
            memo[key] = float(beta)
            return memo[key]
        if t == 0:
            memo[key] = float(mx)
            return memo[key]
        base = solve(t - 1, key)
        cells, prices, weights = [], [], []
        for idx, c in enumerate(key):
            if not c:
                continue
            nxt = list(key)
            nxt[idx] -= 1
            nxt[idx + 1] += 1
            cells.append(divmod(idx, width))
            prices.append(_clamp(solve(t - 1, tuple(nxt)) - base))
            weights.append(c * bw[idx // width])
        gain, chosen = dp_inner_step(prices, weights)
        memo[key] = base + gain
        actions[t][key] = tuple(cells[p - 1] for p in chosen)
        return memo[key]

    start = compress(T, (0,) * classing.k, classing, cap)
    solve(T, start.flat())
    return ReducedDpTable(classing, T, beta, values, actions)


class RoundedPolicy(AdaptivePolicy):
    """Policy on the rounded universe (positions ``1..k``) read off a reduced DP table."""

    def __init__(self, table: ReducedDpTable):
        super().__init__(table.classing.k)
        self.table = table

    @property
    def value(self) -> float:
        return self.table.value

    def instance(self) -> Instance:
        return self.table.classing.rounded_instance(self.table.T)

    def offer(self, t, state):
        loads = state[: self.n]
        if max(loads) >= self.table.beta or t > self.table.T:
            return ()
        key = compress(t, loads, self.table.classing, self.table.cap).flat()
        cells = self.table.actions.get(t, {}).get(key)
        if not cells:
            return ()
        cells = set(cells)
        buckets = self.table.classing.buckets
        return tuple(p + 1 for p in range(self.n) if (buckets[p], loads[p]) in cells)


class RecoveredPolicy(AdaptivePolicy):
    """Runs a rounded policy on a shadow trajectory coupled to the real one.

    State layout: ``n`` real loads followed by ``k`` shadow loads. The shadow
    choice equals the real one with probability ``phi~/phi`` and otherwise
    moves to an option whose rounded probability exceeds its true one.
    """

    def __init__(self, rounded: RoundedPolicy, params: TruncationParams | None = None):
        classing = rounded.table.classing
        super().__init__(classing.n)
        self.rounded = rounded
        self.classing = classing
        self.params = params
        self.beta = rounded.table.beta
        self._pos = classing.position()
        self._bound = 1 / (1 - classing.epsilon) + TIGHTNESS_SLACK

    @property
    def state_dim(self):
        return self.n + self.classing.k

    def offer(self, t, state):
        real, shadow = state[: self.n], state[self.n:]
        if max(real) >= self.beta or max(shadow) >= self.beta:
            return ()
        return tuple(self.classing.kept[p - 1] for p in self.rounded.offer(t, shadow))

    def coupling(self, offer: Assortment) -> tuple[np.ndarray, np.ndarray]:
        """True and rounded probabilities over ``(no purchase, *offer)``."""
        c = self.classing
        pos = [self._pos[i] - 1 for i in offer]
        v = np.array([c.true_weights[p] for p in pos])
        w = np.array([c.bucket_weight(c.buckets[p]) for p in pos])
        phi = np.concatenate(([1.0], v)) / (1 + math.fsum(v))
        phit = np.concatenate(([1.0], w)) / (1 + math.fsum(w))
        ratio = phit / phi
        if ratio.max() > self._bound:
            raise InvariantViolation(
                f"tightness ratio {ratio.max():.6g} exceeds 1/(1-eps) = {self._bound:.6g} for offer {offer}"
            )
        return phi, phit

    def advance(self, t, state, offer, choices, aux):
        nxt = super().advance(t, state, offer, choices, aux)
        if not offer:
            return nxt
        phi, phit = self.coupling(offer)
        lookup = {0: 0, **{i: r for r, i in enumerate(offer, start=1)}}
        opts = np.array([lookup[int(c)] for c in choices], dtype=np.int64)
        up = phit >= phi
        shadow = opts.copy()
        down_rows = ~up[opts]
        if down_rows.any():
            ratio = phit[opts[down_rows]] / phi[opts[down_rows]]
            a = aux[down_rows]
            keep = a < ratio
            moved = shadow[down_rows]
            ups = np.nonzero(up)[0]
            excess = phit[ups] - phi[ups]
            cum = np.cumsum(excess / excess.sum())
            u2 = (a[~keep] - ratio[~keep]) / (1 - ratio[~keep])
            moved[~keep] = ups[np.minimum(np.searchsorted(cum, u2, side="right"), len(ups) - 1)]
            shadow[down_rows] = moved
        bought = shadow > 0
        cols = np.array([0] + [self._pos[i] - 1 for i in offer], dtype=np.int64)
        nxt[np.nonzero(bought)[0], self.n + cols[shadow[bought]]] += 1
        return nxt


def recover_policy(rounded: RoundedPolicy, classing: WeightClassing | None = None, params: TruncationParams | None = None) -> RecoveredPolicy:
    if classing is not None and classing != rounded.table.classing:
        raise DomainError("classing does not match the rounded policy")
    return RecoveredPolicy(rounded, params)


def build_truncated_policy(
    instance: Instance,
    epsilon: float,
    params: TruncationParams | None = None,
    state_cap: int = REDUCED_DP_STATE_CAP,
) -> AdaptivePolicy:
    """Low-regime truncated policy; statically offers everything past the large-``T`` guard."""
    if params is None:
        params = classify_regime(instance, epsilon)
    if params.regime != "low":
        raise DomainError("the truncated pipeline needs the Low regime; use solve_dynamic or force the regime")
    if instance.T >= params.large_T_guard:
        return full_universe_policy(instance)
    classing = build_classing(instance, epsilon, params.light_cutoff)
    table = reduced_dp(classing, instance.T, params.beta, state_cap)
    return RecoveredPolicy(RoundedPolicy(table), params)


@dataclass(frozen=True)
class DynamicSolveReport:
    policy: AdaptivePolicy
    params: TruncationParams
    mode: str
    rounded_value: float | None = None
    notes: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        d = {"mode": self.mode, "params": self.params.to_dict()}
        if self.rounded_value is not None:
            d["rounded_value"] = self.rounded_value
        if isinstance(self.policy, StaticPolicy):
            d["assortment"] = list(self.policy.assortment)
        if isinstance(self.policy, RecoveredPolicy):
            d["kept"] = list(self.policy.classing.kept)
            d["buckets"] = self.policy.classing.J + 1
            d["reduced_states"] = len(self.policy.rounded.table)
        return d


def solve_dynamic(
    instance: Instance,
    epsilon: float,
    params: TruncationParams | None = None,
    state_cap: int = REDUCED_DP_STATE_CAP,
) -> DynamicSolveReport:
    """Regime dispatch: heaviest product when High, truncated pipeline when Low."""
    if params is None:
        params = classify_regime(instance, epsilon)
    if params.regime == "high":
        return DynamicSolveReport(heaviest_product_policy(instance), params, "high-heaviest")
    policy = build_truncated_policy(instance, epsilon, params, state_cap)
    if isinstance(policy, StaticPolicy):
        return DynamicSolveReport(policy, params, "large-T-full")
    return DynamicSolveReport(policy, params, "truncated", rounded_value=policy.rounded.value)


# ---------------------------------------------------------------- adaptivity gap


@dataclass(frozen=True)
class AdaptivityGapReport:
    opt_dp: float
    opt_static: float
    best_weight_ordered: float
    ratio: float
    r_I: float
    static_assortment: Assortment = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["static_assortment"] = list(self.static_assortment)
        return d


def adaptivity_gap(
    instance: Instance,
    dp_cap: int = EXACT_DP_STATE_CAP,
    static_cap: int | None = None,
) -> AdaptivityGapReport:
    opt_dp, _ = exact_dp(instance, dp_cap)
    static = exact_solve(instance) if static_cap is None else exact_solve(instance, static_cap)
    wo = best_weight_ordered(instance)
    if opt_dp < static.value:
        # static policies are dynamic ones; a shortfall can only be rounding
        if opt_dp < static.value * (1 - GAP_TOL):
            raise InvariantViolation(f"dynamic optimum {opt_dp} below static optimum {static.value}")
        opt_dp = static.value
    ratio = opt_dp / static.value
    if not 1 - GAP_TOL <= ratio <= 4 + GAP_TOL:
        raise InvariantViolation(f"adaptivity ratio {ratio} outside [1, 4]")
    return AdaptivityGapReport(opt_dp, static.value, wo.value, ratio, 100 * (1 - 1 / ratio), static.assortment)


# ---------------------------------------------------------------- export / import


def export_policy(policy: AdaptivePolicy, instance: Instance) -> dict:
    """JSON-ready dump: ``(t, state key, offer)`` entries plus parameters."""
    doc = {"instance": instance.to_dict()}
    params = getattr(policy, "params", None)
    if params is not None:
        doc["params"] = params.to_dict()
    if isinstance(policy, StaticPolicy):
        doc.update(kind="static", assortment=list(policy.assortment))
    elif isinstance(policy, ExactDpPolicy):
        tab = policy.table
        order = instance.order
        entries = []
        for t in sorted(tab.actions):
            for key, chosen in sorted(tab.actions[t].items()):
                loads = [0] * instance.n
                for s, m in enumerate(key):
                    loads[order[s] - 1] = m
                entries.append({"t": t, "state": loads, "offer": sorted(order[s] for s in chosen)})
        doc.update(kind="exact", entries=entries)
    elif isinstance(policy, RecoveredPolicy):
        tab = policy.rounded.table
        width = tab.cap + 1
        entries = [
            {
                "t": t,
                "state": [list(key[j * width:(j + 1) * width]) for j in range(len(key) // width)],
                "offer": [list(c) for c in cells],
            }
            for t in sorted(tab.actions)
            for key, cells in sorted(tab.actions[t].items())
        ]
        doc.update(kind="truncated", beta=tab.beta, classing=tab.classing.to_dict(), entries=entries)
    else:
        raise DomainError(f"cannot export a {type(policy).__name__}")
    return doc


def import_policy(doc: dict) -> tuple[Instance, AdaptivePolicy]:
    from maxload.model import instance_from_dict

    instance = instance_from_dict(doc["instance"])
    params = TruncationParams(**doc["params"]) if "params" in doc else None
    kind = doc.get("kind")
    if kind == "static":
        policy = StaticPolicy(instance.n, instance.validate(doc["assortment"]))
        if params is not None:
            policy.params = params
        return instance, policy
    if kind == "exact":
        tab = ExactDpTable(instance, {}, {})
        for e in doc["entries"]:
            key, slots = tab.canonicalize(e["state"])
            where = {i: s for s, i in enumerate(slots)}
            tab.actions.setdefault(int(e["t"]), {})[key] = tuple(sorted(where[i] for i in e["offer"]))
        return instance, ExactDpPolicy(tab)
    if kind == "truncated":
        classing = WeightClassing.from_dict(doc["classing"])
        actions: dict[int, dict] = {}
        for e in doc["entries"]:
            key = tuple(c for row in e["state"] for c in row)
            actions.setdefault(int(e["t"]), {})[key] = tuple(tuple(c) for c in e["offer"])
        tab = ReducedDpTable(classing, instance.T, int(doc["beta"]), {}, actions)
        return instance, RecoveredPolicy(RoundedPolicy(tab), params)
    raise DomainError(f"unknown policy kind {kind!r}")


def offered_products(policy: AdaptivePolicy, t: int, loads: Iterable[int]) -> Assortment:
    """Convenience for inspecting a policy at a real load vector."""
    state = tuple(loads)
    if isinstance(policy, RecoveredPolicy):
        shadow = tuple(state[i - 1] for i in policy.classing.kept)
        state = state + shadow
    return policy.offer(t, state)
