import math
import statistics
from fractions import Fraction

import pytest

from omdsc.adversaries import (CaseIIIAdversary, DegenerateParametersError, FixedSource, LowerBoundAdversary,
                               MarAdversary, PoissonSource, parse_source, poisson_times)
from omdsc.algorithms import (CeilDivAlgorithm, ImmediateAlgorithm, MarReferenceAlgorithm, RecurringAlgorithm,
                              TcpAckAlgorithm)
from omdsc.engine import Instance, run
from omdsc.numerics import EXACT, CyclicInterval, competitive_ratio, solve_alpha
from omdsc.offline import optimal_cost_dp
from omdsc.penalty import PenaltyFunction, PenaltyModeError

ONE = PenaltyFunction.constant_one()


def test_fixed_source_empty_is_finalized():
    src = FixedSource(Instance([], ONE))
    src.start(EXACT)
    assert src.finalized and src.next_wakeup(0) is None


def test_fixed_source_replays_in_order():
    tr = run(ImmediateAlgorithm(), FixedSource(Instance.from_pairs([(0, 2), (1, 1)], ONE)))
    assert [(ev.time, ev.count) for ev in tr.instance.arrivals] == [(0, 2), (1, 1)]


def test_fixed_source_rejects_unsorted_times():
    with pytest.raises(ValueError):
        FixedSource(Instance.from_pairs([(1, 1), (0, 1)], ONE))


def test_poisson_deterministic_and_empty():
    assert poisson_times(2, 50, 11) == poisson_times(2, 50, 11)
    assert poisson_times(2, 50, 11) != poisson_times(2, 50, 12)
    a = run(TcpAckAlgorithm(), PoissonSource(2, 50, 11))
    b = run(TcpAckAlgorithm(), PoissonSource(2, 50, 11))
    assert a.digest() == b.digest()
    empty = run(TcpAckAlgorithm(), PoissonSource(2, 0, 11))
    assert empty.instance.m == 0 and empty.cost == 0
    with pytest.raises(ValueError):
        PoissonSource(0, 5, 1)


def test_poisson_mean_gap():
    times = poisson_times(4, 10_000, 2024, exact=False)
    gaps = [b - a for a, b in zip([0.0] + times, times)]
    assert abs(statistics.fmean(gaps) - 0.25) < 0.05 * 0.25


def test_poisson_exact_grid():
    times = poisson_times(3, 20, 1)
    assert all((t * 2 ** 30).denominator == 1 for t in times)


def test_case_iii_parameters_and_extra_request():
    f = PenaltyFunction.from_zeros([2, 3])
    eps = Fraction(1, 100)
    adv = CaseIIIAdversary(f, eps)
    assert (adv.k_star, adv.ell) == (2, 3)
    tr = run(ImmediateAlgorithm(), adv)
    assert tr.instance.m == 3
    assert [(ev.time, ev.count) for ev in tr.instance.arrivals] == [(0, 2), (eps, 1)]
    opt = optimal_cost_dp(tr.instance).cost
    assert opt == 2 * eps
    assert competitive_ratio(tr.cost, opt) >= 1 / (2 * eps)


def test_case_iii_without_early_match_gives_infinite_ratio():
    f = PenaltyFunction.from_zeros([2, 3])
    tr = run(TcpAckAlgorithm(), CaseIIIAdversary(f, Fraction(1, 1000)))
    assert tr.instance.m == 2
    assert optimal_cost_dp(tr.instance).cost == 0
    assert competitive_ratio(tr.cost, 0) == math.inf


@pytest.mark.parametrize("alg", [ImmediateAlgorithm, TcpAckAlgorithm, lambda: CeilDivAlgorithm(2),
                                 lambda: MarReferenceAlgorithm(2), lambda: RecurringAlgorithm(2)])
def test_case_iii_emits_k_star_or_ell(alg):
    tr = run(alg(), CaseIIIAdversary(PenaltyFunction.from_zeros([2, 3])))
    assert tr.instance.m in (2, 3)


def test_case_iii_requires_case_iii():
    with pytest.raises(PenaltyModeError):
        CaseIIIAdversary(PenaltyFunction.multiples_of(2))


@pytest.mark.parametrize("k", [4, 9, 100])
def test_mar_adversary_counts_and_bounds(k):
    tr = run(TcpAckAlgorithm(), MarAdversary(k))
    a = sum(1 for m in tr.matches if m.time < 1)
    assert tr.instance.m == (a + 1) * (k - 1)
    assert tr.cost >= a + k - 1
    ref = run(MarReferenceAlgorithm(k), FixedSource(tr.instance))
    assert ref.cost <= 2 + a / math.sqrt(k) + math.sqrt(k)


def test_mar_adversary_stops_at_deadline():
    tr = run(TcpAckAlgorithm(), MarAdversary(3))
    assert tr.termination == "normal"
    assert max(ev.time for ev in tr.instance.arrivals) < 1
    late = run(CeilDivAlgorithm(3), MarAdversary(3))
    assert late.termination == "normal"
    assert all(ev.time < 1 for ev in late.instance.arrivals)


def test_endless_same_instant_injections_hit_the_event_bound():
    # every match at time 0 earns k - 1 new requests at time 0, forever
    tr = run(ImmediateAlgorithm(), MarAdversary(3), max_events=500)
    assert tr.termination == "horizon_flush"
    assert tr.matched_count() == tr.instance.m


def test_lb_first_round_width():
    k = 256
    adv = LowerBoundAdversary(k)
    adv.start(EXACT)
    assert adv.on_wakeup(Fraction(0)) == [255]
    assert (adv.p, adv.q, adv.n) == (0, 255, 0)
    injected = adv.on_match(Fraction(1, 100), 1)
    # h = ceil(256 / 4**2) = 16, and a = 1 lies outside [240, 255]
    assert (adv.p, adv.q) == (240, 255)
    assert adv.size == 16 and adv.n == 1
    assert injected == []  # s mod k already equals the new q
    assert adv.W.s_bar == adv.q


def test_lb_second_branch_uses_old_q():
    k = 256
    adv = LowerBoundAdversary(k)
    adv.start(EXACT)
    adv.on_wakeup(Fraction(0))
    injected = adv.on_match(Fraction(1, 100), 250)
    # a = 250 is inside [240, 255], so the interval becomes [q - 2h + 1, q - h] = [224, 239]
    assert (adv.p, adv.q) == (224, 239)
    assert injected == [(239 - 255) % k]
    assert adv.W.s_bar == 239


def test_lb_rejects_degenerate_alpha():
    with pytest.raises(DegenerateParametersError):
        LowerBoundAdversary(10)


@pytest.mark.parametrize("k", [256, 625])
@pytest.mark.parametrize("make", [ImmediateAlgorithm, TcpAckAlgorithm, CeilDivAlgorithm, MarReferenceAlgorithm,
                                  RecurringAlgorithm])
def test_lb_against_every_algorithm(k, make):
    alg = make(k) if make in (CeilDivAlgorithm, MarReferenceAlgorithm, RecurringAlgorithm) else make()
    adv = LowerBoundAdversary(k)
    tr = run(alg, adv)
    alpha = float(solve_alpha(k).alpha_used)
    assert adv.violations == []
    assert adv.n_star is not None and alpha / 2 - 1 <= adv.n_star <= alpha
    assert optimal_cost_dp(tr.instance).cost <= 4
    assert tr.cost >= adv.n_star
    assert all(0 <= x < k for x in adv.injected)
    # no arrivals after the instance was finalized
    final_t = adv.rounds[-1]["t"]
    assert all(ev.time <= final_t for ev in tr.instance.arrivals)
    for r in adv.rounds:
        assert CyclicInterval(r["p"], r["q"], k).size == r["size"]


def test_parse_source():
    assert isinstance(parse_source("lb:256"), LowerBoundAdversary)
    assert parse_source("mar:7").k == 7
    assert parse_source("case3:1/100").eps == Fraction(1, 100)
    src = parse_source("poisson:1,50,7")
    assert (src.m, src.seed) == (50, 7)
    with pytest.raises(ValueError):
        parse_source("storm:1")


def test_parse_fixed_source(tmp_path):
    import json

    path = tmp_path / "inst.json"
    path.write_text(json.dumps(Instance.from_pairs([(0, 1), (Fraction(1, 2), 2)], ONE).to_json()))
    src = parse_source(f"fixed:{path}")
    tr = run(TcpAckAlgorithm(), src)
    assert tr.instance.m == 3
