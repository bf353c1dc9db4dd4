import dataclasses
import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import closed_form_dp, instances, random_instance
from maxload.dynamic_opt import (
    ExactDpPolicy,
    RecoveredPolicy,
    RoundedPolicy,
    WeightClassing,
    adaptivity_gap,
    build_classing,
    build_truncated_policy,
    classify_regime,
    compress,
    dp_inner_step,
    exact_dp,
    expand,
    export_policy,
    import_policy,
    offered_products,
    recover_policy,
    reduced_dp,
    solve_dynamic,
)
from maxload.errors import CapExceededError, DomainError, InvariantViolation
from maxload.model import Instance
from maxload.oracle import brute_force_multinomial_max, expected_max_load
from maxload.policy import StaticPolicy
from maxload.simulate import estimate_policy_value, simulate_policy
from maxload.static_opt import best_weight_ordered, exact_solve


def brute_inner(prices, weights):
    best = 0.0
    for r in range(1, len(prices) + 1):
        for S in itertools.combinations(range(len(prices)), r):
            den = 1 + math.fsum(weights[i] for i in S)
            best = max(best, math.fsum(prices[i] * weights[i] for i in S) / den)
    return best


# ---------------------------------------------------------------- inner step


def test_inner_step_examples():
    assert dp_inner_step([0.0, 0.0], [1.0, 2.0]) == (0.0, ())
    assert dp_inner_step([2.0], [1.0]) == (1.0, (1,))
    assert dp_inner_step([1.0, 0.5], [1.0, 1.0]) == (0.5, (1,))


def test_inner_step_rejects_negative_price():
    with pytest.raises(DomainError):
        dp_inner_step([1.0, -0.1], [1.0, 1.0])
    with pytest.raises(DomainError):
        dp_inner_step([1.0], [1.0, 1.0])


@given(
    st.integers(1, 8).flatmap(
        lambda n: st.tuples(
            st.lists(st.floats(0, 10), min_size=n, max_size=n),
            st.lists(st.floats(0.01, 5), min_size=n, max_size=n),
        )
    )
)
def test_inner_step_is_optimal(pw):
    prices, weights = pw
    value, S = dp_inner_step(prices, weights)
    assert abs(value - brute_inner(prices, weights)) <= 1e-12
    if S:
        den = 1 + math.fsum(weights[i - 1] for i in S)
        assert abs(math.fsum(prices[i - 1] * weights[i - 1] for i in S) / den - value) <= 1e-12


# ---------------------------------------------------------------- exact DP


@pytest.mark.parametrize("v, T", [(0.3, 1), (1.0, 4), (7.0, 9)])
def test_exact_dp_single_product(v, T):
    value, _ = exact_dp(Instance(T=T, weights=[v]))
    assert abs(value - T * v / (1 + v)) <= 1e-12


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 50])
def test_exact_dp_uniform_two_customers(n):
    value, _ = exact_dp(Instance(T=2, weights=[1.0] * n))
    assert abs(value - closed_form_dp(n)) <= 1e-10


def test_exact_dp_reference_values():
    assert exact_dp(Instance(T=2, weights=[1.0] * 3))[0] == pytest.approx(1.3125, abs=1e-12)
    assert exact_dp(Instance(T=2, weights=[1.0] * 50))[0] == pytest.approx(1.489812, abs=1e-6)


def test_exact_dp_cap():
    with pytest.raises(CapExceededError, match="truncated"):
        exact_dp(Instance(T=12, weights=list(np.linspace(0.1, 1.2, 12))))


@given(instances(max_n=4, max_T=5))
def test_value_function_monotone(inst):
    _, table = exact_dp(inst)
    n = inst.n
    for t in range(1, inst.T + 1):
        for key, value in table.values[t].items():
            if key in table.values[t - 1]:
                assert value >= table.values[t - 1][key] - 1e-12
            for i in range(n):
                loads = [0] * n
                for s, m in enumerate(key):
                    loads[inst.order[s] - 1] = m
                loads[inst.order[i] - 1] += 1
                up, _ = table.canonicalize(loads)
                if up in table.values[t]:
                    assert table.values[t][up] >= value - 1e-12
    for key, value in table.values[0].items():
        assert value == max(key)


def test_canonical_permutation_invariance():
    rng = np.random.default_rng(3)
    base = [0.7, 0.7, 0.3, 0.3, 0.3, 1.1]
    ref, _ = exact_dp(Instance(T=4, weights=base))
    for _ in range(5):
        perm = rng.permutation(len(base))
        assert exact_dp(Instance(T=4, weights=[base[i] for i in perm]))[0] == ref


def test_exact_policy_offers_original_indices():
    inst = Instance(T=3, weights=[0.2, 2.5])
    _, table = exact_dp(inst)
    policy = ExactDpPolicy(table)
    assert policy.offer(3, (0, 0)) == (2,)
    assert policy.offer(3, (9, 9)) == ()


@given(instances(max_n=4, max_T=4))
def test_static_dp_weight_ordered_sandwich(inst):
    dp, _ = exact_dp(inst)
    static = exact_solve(inst).value
    wo = best_weight_ordered(inst).value
    assert static <= dp + 1e-12
    assert dp <= 4 * wo + 1e-12


@given(st.integers(1, 6), st.integers(1, 5), st.floats(0.05, 3))
def test_identical_weights_gap_two(n, T, v):
    inst = Instance(T=T, weights=[v] * n)
    assert exact_dp(inst)[0] <= 2 * best_weight_ordered(inst).value + 1e-12


def test_subadditivity():
    rng = np.random.default_rng(8)
    for _ in range(20):
        inst = random_instance(rng, 5, 4, min_n=2)
        mask = rng.random(inst.n) < 0.5
        mask[0], mask[-1] = True, False
        left = [i + 1 for i in range(inst.n) if mask[i]]
        right = [i + 1 for i in range(inst.n) if not mask[i]]
        whole = exact_dp(inst)[0]
        assert whole <= exact_dp(inst.restrict(left))[0] + exact_dp(inst.restrict(right))[0] + 1e-10


@given(st.integers(1, 3), st.integers(1, 4), st.data())
def test_multinomial_upper_bound(n, T, data):
    # n equal-probability categories, each at least as likely as any single product
    w = data.draw(st.lists(st.floats(0.01, 1 / (n - 1) if n > 1 else 5), min_size=n, max_size=n))
    alpha = max(v / (1 + v) for v in w)
    if n * alpha > 1:
        return
    assert brute_force_multinomial_max(T, [alpha] * n) >= exact_dp(Instance(T=T, weights=w))[0] - 1e-12


@given(st.integers(1, 5), st.integers(1, 5), st.data())
def test_easy_regime_half_bound(n, T, data):
    w = data.draw(st.lists(st.floats(0.01, 0.99 / n), min_size=n, max_size=n))
    inst = Instance(T=T, weights=w)
    assert expected_max_load(inst, range(1, n + 1)) >= exact_dp(inst)[0] / 2 - 1e-12


# ---------------------------------------------------------------- regimes


def test_regime_examples():
    # the weight threshold is 1/eps = 4, inclusive
    assert classify_regime(Instance(T=2, weights=[4.0, 1.0]), 0.25).regime == "high"
    assert classify_regime(Instance(T=2, weights=[3.0, 1.0]), 0.25).regime == "low"
    # many customers trigger the load threshold instead
    assert classify_regime(Instance(T=5000, weights=[0.5]), 0.5).regime == "high"
    low = classify_regime(Instance(T=2, weights=[0.1, 0.05]), 0.5)
    assert low.regime == "low"
    assert low.high_threshold == pytest.approx(12 * math.log(4) / 0.125)
    assert low.tau == pytest.approx(300 * math.log(4) ** 2 / 0.5**6)
    assert low.beta == math.ceil(low.tau / 0.5)
    assert low.light_cutoff == pytest.approx(0.25 * 0.1 / 2)
    assert low.large_T_guard == pytest.approx(576 * 8 / 0.5**8)
    forced = classify_regime(Instance(T=2, weights=[3.0]), 0.25, force_regime="low")
    assert forced.regime == "low" and forced.regime_forced


def test_regime_overrides():
    p = classify_regime(Instance(T=3, weights=[0.5]), 0.25, override_tau=2.0)
    assert p.tau == 2.0 and p.beta == 8 and p.tau_overridden
    p = classify_regime(Instance(T=3, weights=[0.5]), 0.25, override_beta=3)
    assert p.beta == 3 and p.beta_overridden
    with pytest.raises(DomainError):
        classify_regime(Instance(T=3, weights=[0.5]), 1.0)
    with pytest.raises(DomainError):
        classify_regime(Instance(T=3, weights=[0.5]), 0.25, override_beta=0)


def test_single_customer_single_product_has_positive_tau():
    assert classify_regime(Instance(T=1, weights=[0.1]), 0.5).tau > 0


# ---------------------------------------------------------------- classing


@given(instances(max_n=8, max_T=3), st.sampled_from([0.1, 0.25, 0.5]))
def test_rounding_is_left_endpoint(inst, eps):
    cutoff = eps**2 * max(inst.weights) / inst.n
    c = build_classing(inst, eps, cutoff)
    assert all(inst.weight(i) > cutoff for i in c.kept)
    assert all(inst.weight(i) <= cutoff for i in c.dropped)
    for v, r in zip(c.true_weights, c.rounded_weights):
        assert (1 - eps) * v <= r <= v
    assert c.J == math.floor(math.log(c.v_max / c.v_min) / math.log(1 + eps) + 1e-9)


def test_powers_get_one_bucket_each():
    eps = 0.25
    c = build_classing(Instance(T=2, weights=[1.0, 1.25, 1.5625]), eps, 0.0)
    assert c.buckets == (0, 1, 2) and c.rounded_weights == (1.0, 1.25, 1.5625)


@given(instances(max_n=6, max_T=6), st.data())
def test_compress_expand_round_trip(inst, data):
    c = build_classing(inst, 0.25, 0.0)
    loads = data.draw(st.lists(st.integers(0, inst.T), min_size=c.k, max_size=c.k))
    state = compress(1, loads, c, inst.T)
    assert sum(map(sum, state.counts)) == c.k
    again = compress(1, expand(state, c), c, inst.T)
    assert again == state


# ---------------------------------------------------------------- truncated pipeline


def test_truncated_single_product():
    inst = Instance(T=5, weights=[0.4])
    params = classify_regime(inst, 0.25)
    policy = build_truncated_policy(inst, 0.25, params)
    assert isinstance(policy, RecoveredPolicy)
    assert policy.rounded.value == pytest.approx(5 * 0.4 / 1.4, abs=1e-12)
    tr = simulate_policy(inst, policy, seed=3)
    assert all(o == (1,) for o in tr.offers)


def test_truncated_matches_exact_on_grid_weights(data_dir):
    from maxload.model import load_instance

    inst = load_instance(data_dir / "powers.json")
    params = classify_regime(inst, 0.25, override_tau=10)
    assert params.regime == "low" and params.beta >= inst.T
    report = solve_dynamic(inst, 0.25, params)
    exact, _ = exact_dp(inst)
    assert report.rounded_value == pytest.approx(exact, abs=1e-12)
    mean, se = estimate_policy_value(inst, report.policy, 200_000, seed=4)
    assert abs(mean - exact) <= 4 * se


def test_truncated_refuses_high_regime():
    inst = Instance(T=3, weights=[5.0])
    with pytest.raises(DomainError):
        build_truncated_policy(inst, 0.25)
    report = solve_dynamic(inst, 0.25)
    assert report.mode == "high-heaviest" and report.policy.assortment == (1,)


def test_large_T_guard_offers_everything():
    inst = Instance(T=4, weights=[0.2, 0.1])
    params = dataclasses.replace(classify_regime(inst, 0.25), large_T_guard=3.0)
    report = solve_dynamic(inst, 0.25, params)
    assert report.mode == "large-T-full" and report.policy.assortment == (1, 2)


def test_reduced_dp_cap():
    inst = Instance(T=6, weights=[0.1, 0.13, 0.17, 0.2])
    c = build_classing(inst, 0.25, 0.0)
    with pytest.raises(CapExceededError):
        reduced_dp(c, inst.T, 100, state_cap=10)


def test_light_products_never_offered():
    inst = Instance(T=4, weights=[0.5, 0.001, 0.4])
    params = classify_regime(inst, 0.25, override_tau=10)
    policy = build_truncated_policy(inst, 0.25, params)
    assert policy.classing.dropped == (2,)
    for seed in range(20):
        assert all(2 not in o for o in simulate_policy(inst, policy, seed).offers)


def test_cap_stops_offers():
    inst = Instance(T=6, weights=[0.9, 0.8])
    params = classify_regime(inst, 0.25, override_beta=2)
    policy = build_truncated_policy(inst, 0.25, params)
    for seed in range(200):
        tr = simulate_policy(inst, policy, seed)
        loads = [0, 0]
        for offer, choice in zip(tr.offers, tr.choices):
            if max(loads) >= 2:
                assert offer == ()
            if choice:
                loads[choice - 1] += 1
        assert tr.max_load <= 2


def _rounded_pair(weights, eps=0.25, beta=50, T=4):
    inst = Instance(T=T, weights=weights)
    c = build_classing(inst, eps, 0.0)
    rounded = RoundedPolicy(reduced_dp(c, T, beta))
    return inst, c, rounded


def test_identity_classing_degenerates():
    inst, c, rounded = _rounded_pair([1.0, 1.25, 1.5625])
    recovered = recover_policy(rounded, c)
    rinst = c.rounded_instance(inst.T)
    for seed in range(30):
        a = simulate_policy(inst, recovered, seed)
        b = simulate_policy(rinst, rounded, seed)
        assert a.offers == b.offers and a.choices == b.choices


def test_redistribution_weights_sum_to_one():
    inst, c, rounded = _rounded_pair([0.9, 0.7, 0.33, 0.2])
    policy = recover_policy(rounded, c)
    for offer in [(1,), (1, 2), (2, 3, 4), (1, 2, 3, 4)]:
        phi, phit = policy.coupling(offer)
        up = phit >= phi
        alpha = np.sum((phi - phit)[~up])
        assert alpha >= 0
        if alpha > 0:
            p = (phit[up] - phi[up]) / alpha
            assert abs(p.sum() - 1) <= 1e-12


def test_coupling_preserves_rounded_marginals():
    inst, c, rounded = _rounded_pair([0.9, 0.7, 0.33])
    policy = recover_policy(rounded, c)
    offer = (1, 2, 3)
    phi, phit = policy.coupling(offer)
    rng = np.random.default_rng(0)
    N = 200_000
    u = rng.random(N)
    cum = np.cumsum(phi[1:])
    choices = np.where(u < cum[-1], np.searchsorted(cum, u, side="right") + 1, 0)
    choices = np.array(offer + (0,))[np.where(choices == 0, 3, choices - 1)]
    state = np.zeros(policy.state_dim, dtype=np.int64)
    nxt = policy.advance(4, state, offer, choices, rng.random(N))
    shadow = nxt[:, inst.n:]
    freq = np.concatenate(([np.mean(shadow.sum(axis=1) == 0)], shadow.mean(axis=0)))
    assert np.allclose(freq, phit, atol=5 * np.sqrt(0.25 / N))


def test_tightness_violation_raises():
    inst, c, rounded = _rounded_pair([0.9, 0.7])
    # claim rounded weights far above the true ones
    bad = dataclasses.replace(c, true_weights=(0.09, 0.07))
    rounded.table.classing = bad
    policy = RecoveredPolicy(rounded)
    with pytest.raises(InvariantViolation):
        policy.coupling((1, 2))


def test_recover_rejects_other_classing():
    inst, c, rounded = _rounded_pair([0.9, 0.7])
    other = build_classing(Instance(T=4, weights=[0.5, 0.4]), 0.25, 0.0)
    with pytest.raises(DomainError):
        recover_policy(rounded, other)


def test_recovered_within_factor_of_rounded():
    rng = np.random.default_rng(21)
    eps = 0.25
    for _ in range(3):
        inst = random_instance(rng, 4, 5, low=0.1, high=1.5)
        c = build_classing(inst, eps, 0.0)
        rounded = RoundedPolicy(reduced_dp(c, inst.T, 100))
        rec, rec_se = estimate_policy_value(inst, recover_policy(rounded, c), 100_000, seed=1)
        ref, ref_se = estimate_policy_value(c.rounded_instance(inst.T), rounded, 100_000, seed=2)
        assert rec >= (1 - eps) * ref - 4 * math.hypot(rec_se, ref_se)
        assert abs(ref - rounded.value) <= 4 * ref_se


# ---------------------------------------------------------------- adaptivity gap


def test_gap_examples():
    r = adaptivity_gap(Instance(T=2, weights=[1.0] * 3))
    assert r.ratio == pytest.approx(7 / 6, abs=1e-12)
    assert r.r_I == pytest.approx(100 / 7, abs=1e-9)
    one = adaptivity_gap(Instance(T=4, weights=[0.8]))
    assert one.ratio == pytest.approx(1.0, abs=1e-12) and one.r_I == pytest.approx(0.0, abs=1e-9)


def test_gap_approaches_four_thirds():
    ratios = [adaptivity_gap(Instance(T=2, weights=[1.0] * n)).ratio for n in (3, 10, 50)]
    assert ratios == sorted(ratios) and ratios[-1] < 4 / 3
    assert ratios[-1] == pytest.approx(1.3243, abs=1e-3)


# ---------------------------------------------------------------- export


def test_export_exact_round_trip():
    inst = Instance(T=3, weights=[0.5, 0.5, 1.2])
    _, table = exact_dp(inst)
    policy = ExactDpPolicy(table)
    doc = json.loads(json.dumps(export_policy(policy, inst)))
    inst2, policy2 = import_policy(doc)
    assert inst2 == inst
    for t, level in table.actions.items():
        for key in level:
            loads = [0] * inst.n
            for s, m in enumerate(key):
                loads[inst.order[s] - 1] = m
            assert policy2.offer(t, tuple(loads)) == policy.offer(t, tuple(loads))


def test_export_truncated_round_trip():
    inst = Instance(T=4, weights=[0.6, 0.45, 0.2])
    params = classify_regime(inst, 0.25, override_tau=10)
    policy = build_truncated_policy(inst, 0.25, params)
    doc = json.loads(json.dumps(export_policy(policy, inst)))
    assert doc["kind"] == "truncated" and doc["params"]["tau"] == 10
    inst2, policy2 = import_policy(doc)
    for seed in range(20):
        assert simulate_policy(inst2, policy2, seed) == simulate_policy(inst, policy, seed)
    assert offered_products(policy2, 4, (0, 0, 0)) == offered_products(policy, 4, (0, 0, 0))


def test_export_static():
    inst = Instance(T=4, weights=[0.6, 0.45])
    doc = export_policy(StaticPolicy(2, (2,)), inst)
    assert import_policy(doc)[1].assortment == (2,)
    with pytest.raises(DomainError):
        import_policy({**doc, "kind": "mystery"})
