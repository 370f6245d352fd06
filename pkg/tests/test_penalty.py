import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omdsc.engine import ArrivalEvent, Instance
from omdsc.penalty import (NotScalableError, PenaltyFunction, PenaltyModeError, case_iii_parameters, classify,
                           effective_penalty, effective_penalty_table, scale_normalize, zero_penalty_set)


def sums_of(zeros, limit):
    """Every total up to ``limit`` reachable as a sum of zeros, by breadth-first search."""
    seen = set()
    frontier = {0}
    while frontier:
        nxt = set()
        for s in frontier:
            for z in zeros:
                t = s + z
                if t <= limit and t not in seen:
                    seen.add(t)
                    nxt.add(t)
        frontier = nxt
    return seen


def integer_partitions(n, largest=None):
    largest = largest or n
    if n == 0:
        yield []
        return
    for part in range(min(n, largest), 0, -1):
        for rest in integer_partitions(n - part, part):
            yield [part] + rest


def test_zero_set_two_and_three():
    f = PenaltyFunction.from_zeros([2, 3], 10)
    reach = zero_penalty_set(f, 10)
    assert [n for n in range(1, 11) if reach[n]] == list(range(2, 11))
    assert reach[0]


def test_zero_set_empty_for_constant_one():
    reach = zero_penalty_set(PenaltyFunction.constant_one(), 30)
    assert not any(reach[1:])


def test_zero_set_three_and_six_matches_enumeration():
    f = PenaltyFunction.from_zeros([3, 6])
    reach = zero_penalty_set(f, 20)
    expected = sums_of([3, 6], 20)
    assert {n for n in range(1, 21) if reach[n]} == expected == set(range(3, 21, 3))


def test_zero_set_needs_binary():
    with pytest.raises(PenaltyModeError):
        zero_penalty_set(PenaltyFunction.ceil_div(3), 5)
    with pytest.raises(PenaltyModeError):
        classify(PenaltyFunction.linear())


zero_sets = st.lists(st.integers(1, 40), min_size=0, max_size=4, unique=True)


@settings(max_examples=80)
@given(zero_sets)
def test_zero_set_closed_under_addition(zeros):
    f = PenaltyFunction.from_zeros(zeros)
    limit = 200
    reach = zero_penalty_set(f, limit)
    members = [n for n in range(1, limit + 1) if reach[n]]
    assert set(members) == sums_of(zeros, limit)
    present = set(members)
    for a in members[:30]:
        for b in members[:30]:
            if a + b <= limit:
                assert a + b in present


@settings(max_examples=80)
@given(zero_sets)
def test_classify_consistent_with_zero_set(zeros):
    f = PenaltyFunction.from_zeros(zeros)
    cls = classify(f)
    limit = 200
    reach = zero_penalty_set(f, limit)
    members = {n for n in range(1, limit + 1) if reach[n]}
    if cls.variant == "I":
        assert not members
    elif cls.variant == "II":
        assert members == set(range(cls.k, limit + 1, cls.k))
    else:
        assert members
        assert all(members != set(range(d, limit + 1, d)) for d in range(1, limit + 1))


def test_classify_examples():
    assert classify(PenaltyFunction.constant_one()).variant == "I"
    two = classify(PenaltyFunction.from_zeros([2, 4]))
    assert (two.variant, two.k) == ("II", 2)
    assert classify(PenaltyFunction.from_zeros([2, 3])).variant == "III"
    assert classify(PenaltyFunction.multiples_of(5, 40)).label == "Case (ii), k=5"


@pytest.mark.parametrize("zeros,expected", [([2, 3], (2, 3)), ([4, 6, 7], (4, 6)), ([6, 10, 15], (6, 10)),
                                            ([3, 5], (3, 5))])
def test_case_iii_parameters(zeros, expected):
    k_star = min(sums_of(zeros, 500))
    ell = min(n for n in sums_of(zeros, 500) if n % k_star)
    assert (k_star, ell) == expected
    assert case_iii_parameters(PenaltyFunction.from_zeros(zeros)) == expected


def test_case_iii_parameters_rejects_other_cases():
    with pytest.raises(PenaltyModeError):
        case_iii_parameters(PenaltyFunction.multiples_of(3))


def test_effective_penalty_examples():
    assert effective_penalty(PenaltyFunction.from_zeros([2, 3]), 7) == 0
    assert effective_penalty(PenaltyFunction.from_zeros([2, 3]), 1) == 1
    assert effective_penalty(PenaltyFunction.ceil_div(3), 7) == 3
    f = PenaltyFunction(table=(Fraction(5, 2), 1, 4))
    assert effective_penalty(f, 1) == Fraction(5, 2)


def test_ceil_div_family_needs_no_split():
    f = PenaltyFunction.ceil_div(3)
    g = effective_penalty_table(f, 50)
    assert all(g[n] == -(-n // 3) for n in range(1, 51))


@settings(max_examples=60)
@given(st.lists(st.fractions(min_value=0, max_value=5, max_denominator=4), min_size=1, max_size=6),
       st.sampled_from(["constant", "linear"]))
def test_effective_penalty_is_best_partition(values, tail):
    f = PenaltyFunction(table=tuple(values), tail=tail)
    g = effective_penalty_table(f, 12)
    for n in range(1, 13):
        best = min(sum(f(p) for p in parts) for parts in integer_partitions(n))
        assert g[n] == best


@settings(max_examples=60)
@given(zero_sets)
def test_effective_penalty_binary_and_subadditive(zeros):
    f = PenaltyFunction.from_zeros(zeros)
    g = effective_penalty_table(f, 100)
    reach = zero_penalty_set(f, 100)
    for n in range(1, 101):
        assert g[n] == (0 if reach[n] else 1)
    for a in range(1, 100):
        for b in range(1, 101 - a):
            assert g[a + b] <= g[a] + g[b]


def test_json_roundtrip():
    for f in (PenaltyFunction.constant_one(), PenaltyFunction.from_zeros([2, 3]), PenaltyFunction.ceil_div(4),
              PenaltyFunction.linear(), PenaltyFunction(table=(Fraction(1, 3), 2), tail_value=Fraction(7, 2))):
        assert PenaltyFunction.from_json(f.to_json()) == f
    assert PenaltyFunction.ceil_div(4).to_json()["tail"] == {"ceil_div": 4}
    with pytest.raises(ValueError):
        PenaltyFunction.from_json({"table": [1], "tail": "sometimes"})


def test_invalid_tables():
    with pytest.raises(ValueError):
        PenaltyFunction(table=())
    with pytest.raises(ValueError):
        PenaltyFunction(table=(1, -1))
    with pytest.raises(ValueError):
        PenaltyFunction.constant_one()(0)


def schedule_cost(instance, groups):
    """Cost of matching each group (list of request indices) at a given time."""
    times = instance.request_times()
    f = instance.penalty
    total = 0
    for members, at in groups:
        total += f(len(members)) + sum(at - times[i] for i in members)
    return total


def test_scale_normalize_hour_units():
    f = PenaltyFunction(table=(60, 0), tail_value=60)
    inst = Instance.from_pairs([(0, 1), (30, 1), (90, 1)], f)
    scaled, mu = scale_normalize(inst, 60)
    assert mu == 60
    assert [ev.time for ev in scaled.arrivals] == [0, Fraction(1, 2), Fraction(3, 2)]
    assert scaled.penalty.mode == "binary"
    assert scaled.penalty.zeros == [2]


def test_scale_normalize_identity():
    inst = Instance.from_pairs([(0, 2), (Fraction(1, 3), 1)], PenaltyFunction.from_zeros([2]))
    scaled, mu = scale_normalize(inst, 1)
    assert scaled.arrivals == inst.arrivals
    assert scaled.penalty == inst.penalty


def test_scale_normalize_preserves_schedule_costs():
    rng = random.Random(5)
    mu = Fraction(7, 3)
    table = tuple(rng.choice([0, mu]) for _ in range(6))
    f = PenaltyFunction(table=table, tail_value=mu)
    times = sorted(Fraction(rng.randint(0, 40), 4) for _ in range(10))
    inst = Instance([ArrivalEvent(t, 1, i) for i, t in enumerate(times)], f)
    scaled, _ = scale_normalize(inst, mu)
    for _ in range(20):
        cuts = sorted(rng.sample(range(1, 10), rng.randint(0, 5)))
        bounds = [0] + cuts + [10]
        groups, scaled_groups = [], []
        for a, b in zip(bounds, bounds[1:]):
            at = times[b - 1] + Fraction(rng.randint(0, 8), 2)
            groups.append((range(a, b), at))
            scaled_groups.append((range(a, b), at / mu))
        assert schedule_cost(inst, groups) == mu * schedule_cost(scaled, scaled_groups)


def test_scale_normalize_rejects_mixed_values():
    f = PenaltyFunction(table=(1, 2, 0))
    with pytest.raises(NotScalableError):
        scale_normalize(Instance.from_pairs([(0, 1)], f), 1)
