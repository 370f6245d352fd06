"""Runs every acceptance criterion once and prints one pass/fail line per criterion."""

import pytest

from omdsc.acceptance import run_all

CRITERIA = {
    1: "oracle_equivalence",
    2: "tcp_ack_two_competitive",
    3: "ceil_div_two_competitive",
    4: "k_one_immediate",
    5: "recurring_invariants",
    6: "recurring_phase_cost",
    7: "recurring_phase_end",
    8: "lower_bound_adversary",
    9: "match_all_remaining",
    10: "case_iii_unbounded",
    11: "numerics_identities",
    12: "determinism",
}


@pytest.fixture(scope="module")
def results(pytestconfig):
    capman = pytestconfig.pluginmanager.getplugin("capturemanager")
    with capman.global_and_fixture_disabled():
        print()
        out = run_all(seed=0)
    return {r.number: r for r in out}


def test_every_criterion_reported(results):
    assert sorted(results) == sorted(CRITERIA)


@pytest.mark.parametrize("number", sorted(CRITERIA), ids=[f"{n:02d}_{name}" for n, name in CRITERIA.items()])
def test_criterion(results, number):
    res = results[number]
    assert res.passed, res.line()
