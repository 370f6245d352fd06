import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omdsc.engine import ArrivalEvent, Instance
from omdsc.offline import brute_force_opt, brute_force_with_delays, optimal_cost_dp
from omdsc.penalty import PenaltyFunction, effective_penalty_table, zero_penalty_set


def make(times, f):
    times = sorted(Fraction(t) for t in times)
    return Instance([ArrivalEvent(t, 1, i) for i, t in enumerate(times)], f)


def test_case_i_single_batch():
    inst = Instance.from_pairs([(0, 2)], PenaltyFunction.constant_one())
    assert optimal_cost_dp(inst).cost == 1


def test_pair_waits_for_partner():
    f = PenaltyFunction.multiples_of(2)
    sol = optimal_cost_dp(make([0, 1], f))
    assert sol.cost == 1
    assert sol.groups == [(range(0, 2), 1)]
    assert optimal_cost_dp(make([0], f)).cost == 1


def test_empty():
    assert optimal_cost_dp(Instance([], PenaltyFunction.constant_one())).cost == 0
    assert brute_force_opt(Instance([], PenaltyFunction.constant_one())).cost == 0


def test_triple_modulus_example():
    inst = make([0, 0, 10], PenaltyFunction.multiples_of(3))
    assert brute_force_opt(inst).cost == 2
    assert optimal_cost_dp(inst).cost == 2


def test_brute_force_size_limit():
    with pytest.raises(ValueError):
        brute_force_opt(make(range(11), PenaltyFunction.constant_one()))


def test_unfinalized_instance_rejected():
    inst = Instance([ArrivalEvent(0, 1)], PenaltyFunction.constant_one(), finalized=False)
    with pytest.raises(ValueError):
        optimal_cost_dp(inst)


def test_hull_needs_case_i_or_ii():
    with pytest.raises(ValueError):
        optimal_cost_dp(make([0, 1], PenaltyFunction.from_zeros([2, 3])), method="hull")


penalties = st.one_of(
    st.just(PenaltyFunction.constant_one()),
    st.integers(1, 5).map(lambda k: PenaltyFunction.multiples_of(k, 8)),
    st.sampled_from([[2, 3], [3, 5], [4, 6, 7], [2, 5]]).map(PenaltyFunction.from_zeros),
    st.integers(1, 4).map(PenaltyFunction.ceil_div),
    st.just(PenaltyFunction.linear()),
)
times = st.lists(st.fractions(min_value=0, max_value=4, max_denominator=4), max_size=7)


def evaluate(sol, inst, f):
    """Recompute a solution's cost from its groups and check the groups partition the requests."""
    ts = sorted(inst.request_times())
    g = effective_penalty_table(f, max(1, len(ts)))
    seen = []
    total = 0
    for members, at in sol.groups:
        members = list(members)
        seen += members
        assert at == max(ts[i] for i in members)
        total += g[len(members)] + sum(at - ts[i] for i in members)
    assert sorted(seen) == list(range(len(ts)))
    return total


@settings(max_examples=200, deadline=None)
@given(penalties, times)
def test_dp_equals_brute_force(f, ts):
    inst = make(ts, f)
    dp = optimal_cost_dp(inst)
    bf = brute_force_opt(inst)
    assert dp.cost == bf.cost
    assert evaluate(dp, inst, f) == dp.cost
    assert evaluate(bf, inst, f) == bf.cost


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 7), st.lists(st.fractions(min_value=0, max_value=20, max_denominator=3), max_size=60))
def test_hull_dp_equals_quadratic(k, ts):
    for f in (PenaltyFunction.multiples_of(k), PenaltyFunction.constant_one()):
        inst = make(ts, f)
        hull = optimal_cost_dp(inst, method="hull")
        quad = optimal_cost_dp(inst, method="quadratic")
        assert hull.cost == quad.cost
        assert evaluate(hull, inst, f) == hull.cost


def test_delaying_matches_never_helps():
    rng = random.Random(17)
    delays = [Fraction(1, 2), 1, 3]
    for _ in range(20):
        f = rng.choice([PenaltyFunction.constant_one(), PenaltyFunction.multiples_of(2),
                        PenaltyFunction.from_zeros([2, 3])])
        inst = make([Fraction(rng.randint(0, 8), 2) for _ in range(rng.randint(1, 5))], f)
        assert brute_force_with_delays(inst, delays) == brute_force_opt(inst).cost


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([[1], [2], [3], [2, 3], [4, 6]]),
       st.lists(st.tuples(st.integers(0, 3), st.integers(1, 6)), max_size=5))
def test_zero_cost_iff_each_instant_is_zero_sized(zeros, batches):
    f = PenaltyFunction.from_zeros(zeros)
    counts = {}
    for t, c in batches:
        counts[t] = counts.get(t, 0) + c
    inst = Instance.from_pairs(sorted(counts.items()), f)
    reach = zero_penalty_set(f, 40)
    expect_zero = all(reach[c] for c in counts.values())
    assert (optimal_cost_dp(inst).cost == 0) == expect_zero


def test_solution_json():
    sol = optimal_cost_dp(make([0, Fraction(1, 2)], PenaltyFunction.multiples_of(2)))
    assert sol.to_json() == {"cost": "1/2", "method": "dp", "groups": [{"first": 0, "size": 2, "t": "1/2"}]}
