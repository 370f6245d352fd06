"""The acceptance suite: twelve end-to-end checks, each returning a result line.

Shared by ``tests/test_acceptance.py`` and the ``validate`` CLI command.
Everything runs on the exact backend and is seeded, so the whole suite is
reproducible.
"""

from __future__ import annotations

import hashlib
import math
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, List

from .adversaries import CaseIIIAdversary, FixedSource, LowerBoundAdversary, MarAdversary, PoissonSource, poisson_times
from .algorithms import (CeilDivAlgorithm, ImmediateAlgorithm, MarReferenceAlgorithm, RecurringAlgorithm,
                         TcpAckAlgorithm)
from .engine import ArrivalEvent, Instance, run
from .numerics import CyclicInterval, competitive_ratio, interval_contains, solve_alpha
from .offline import brute_force_opt, optimal_cost_dp
from .penalty import PenaltyFunction

RECURRING_KS = (16, 81, 256, 625)
LB_KS = (256, 625, 1296)
MAR_KS = (100, 400)
CASE3_EPS = (Fraction(1, 100), Fraction(1, 1000), Fraction(1, 10000))
RANDOM_RECURRING_PER_K = 100


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0
    digests: List[str] = field(default_factory=list)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:>2}. {self.title}: {self.detail} ({self.seconds:.1f}s)"


def _algorithms_for(k: int) -> list:
    """One of each implemented deterministic algorithm, parameterized by k."""
    return [ImmediateAlgorithm(), TcpAckAlgorithm(), CeilDivAlgorithm(k), MarReferenceAlgorithm(k),
            RecurringAlgorithm(k)]


def _random_instance(rng: random.Random, m: int, penalty, max_tick: int = 12, denom: int = 4) -> Instance:
    times = sorted(Fraction(rng.randint(0, max_tick), denom) for _ in range(m))
    return Instance([ArrivalEvent(t, 1, i) for i, t in enumerate(times)], penalty)


def _poisson_instance(rng: random.Random, m: int, penalty) -> Instance:
    rate = rng.choice([Fraction(1, 4), Fraction(1, 2), 1, 2, 4, 10])
    times = poisson_times(rate, m, rng.randrange(2 ** 32))
    return Instance([ArrivalEvent(t, 1, i) for i, t in enumerate(times)], penalty)


def _ratio(transcript, penalty=None):
    opt = optimal_cost_dp(transcript.instance, penalty)
    return competitive_ratio(transcript.cost, opt.cost), opt


def _random_penalty(rng: random.Random):
    kind = rng.choice(["i", "ii", "iii", "ceil"])
    if kind == "i":
        return PenaltyFunction.constant_one()
    if kind == "ii":
        return PenaltyFunction.multiples_of(rng.randint(1, 5), 8)
    if kind == "iii":
        zeros = rng.choice([[2, 3], [3, 5], [2, 5], [4, 6, 7], [3, 4]])
        return PenaltyFunction.from_zeros(zeros)
    return PenaltyFunction.ceil_div(rng.randint(1, 4))


# 1 ------------------------------------------------------------------------

def oracle_equivalence(seed: int = 0) -> CriterionResult:
    rng = random.Random(seed)
    mismatches = []
    for trial in range(200):
        f = _random_penalty(rng)
        inst = _random_instance(rng, rng.randint(0, 8), f)
        dp = optimal_cost_dp(inst).cost
        quad = optimal_cost_dp(inst, method="quadratic").cost
        bf = brute_force_opt(inst).cost
        if not (dp == quad == bf):
            mismatches.append((trial, dp, quad, bf))
    ok = not mismatches
    return CriterionResult(1, "DP equals brute force on 200 random instances", ok,
                           "200/200 equal" if ok else f"{len(mismatches)} mismatches, first {mismatches[0]}")


# 2 ------------------------------------------------------------------------

def tcp_ack_two_competitive(seed: int = 0) -> CriterionResult:
    rng = random.Random(seed)
    f = PenaltyFunction.constant_one()
    worst = Fraction(0)
    digests = []
    for _ in range(500):
        inst = _poisson_instance(rng, rng.randint(1, 50), f)
        tr = run(TcpAckAlgorithm(), FixedSource(inst))
        ratio, _ = _ratio(tr)
        worst = max(worst, ratio)
        digests.append(tr.digest())
    single = run(TcpAckAlgorithm(), FixedSource(Instance.from_pairs([(0, 1)], f)))
    single_ratio, _ = _ratio(single)
    ok = worst <= 2 and single_ratio == 2
    return CriterionResult(2, "tcp_ack ratio <= 2 on 500 case-(i) instances", ok,
                           f"max ratio {float(worst):.4f}; single request ratio {single_ratio}", digests=digests)


# 3 ------------------------------------------------------------------------

def ceil_div_two_competitive(seed: int = 0) -> CriterionResult:
    rng = random.Random(seed)
    parts = []
    ok = True
    digests = []
    for k in (1, 2, 3, 5, 8):
        f = PenaltyFunction.ceil_div(k)
        worst = Fraction(0)
        exact_one = True
        for _ in range(200):
            inst = _poisson_instance(rng, rng.randint(1, 40), f)
            tr = run(CeilDivAlgorithm(k), FixedSource(inst))
            ratio, _ = _ratio(tr)
            worst = max(worst, ratio)
            exact_one &= ratio == 1
            digests.append(tr.digest())
        ok &= worst <= 2
        if k == 1:
            ok &= exact_one
        parts.append(f"k={k}: {float(worst):.3f}")
    return CriterionResult(3, "ceil_div ratio <= 2, and exactly 1 at k=1", ok, "max ratios " + ", ".join(parts),
                           digests=digests)


# 4 ------------------------------------------------------------------------

def k_one_immediate(seed: int = 0) -> CriterionResult:
    rng = random.Random(seed)
    bad = 0
    digests = []
    for _ in range(200):
        f = PenaltyFunction.multiples_of(1, rng.randint(1, 6))
        inst = _poisson_instance(rng, rng.randint(0, 30), f)
        tr = run(ImmediateAlgorithm(), FixedSource(inst))
        opt = optimal_cost_dp(inst).cost
        bad += not (tr.cost == 0 == opt)
        digests.append(tr.digest())
    return CriterionResult(4, "immediate matching costs 0 = OPT when f(1) = 0", bad == 0,
                           f"{200 - bad}/200 instances with zero cost", digests=digests)


# 5, 6, 7 --------------------------------------------------------------------

@dataclass
class RecurringRuns:
    transcripts: list
    labels: list

    @classmethod
    def collect(cls, seed: int = 0, per_k: int = RANDOM_RECURRING_PER_K) -> "RecurringRuns":
        rng = random.Random(seed)
        transcripts, labels = [], []
        for k in RECURRING_KS:
            f = PenaltyFunction.multiples_of(k)
            for source in (LowerBoundAdversary(k), MarAdversary(k)):
                transcripts.append(run(RecurringAlgorithm(k), source))
                labels.append(f"recurring:{k} vs {source.spec}")
            for trial in range(per_k):
                rate = rng.choice([k / 8, k / 4, k / 2, k])
                m = rng.randint(k, 3 * k)
                src = PoissonSource(Fraction(rate), m, rng.randrange(2 ** 32), f)
                transcripts.append(run(RecurringAlgorithm(k), src))
                labels.append(f"recurring:{k} vs {src.spec}")
        for k in LB_KS:
            if k not in RECURRING_KS:
                transcripts.append(run(RecurringAlgorithm(k), LowerBoundAdversary(k)))
                labels.append(f"recurring:{k} vs lb:{k}")
        return cls(transcripts, labels)


def recurring_invariants(runs: RecurringRuns) -> CriterionResult:
    total = 0
    first = None
    for tr, label in zip(runs.transcripts, runs.labels):
        diag = tr.diagnostics["algorithm"]
        total += diag["violation_count"]
        if diag["violation_count"] and first is None:
            first = f"{label}: {diag['violations'][0]}"
    return CriterionResult(5, "recurring entry invariants hold", total == 0,
                           f"{len(runs.transcripts)} runs, {total} violations" + (f"; {first}" if first else ""),
                           digests=[tr.digest() for tr in runs.transcripts])


def recurring_phase_cost(runs: RecurringRuns) -> CriterionResult:
    phases = 0
    failures = []
    worst = 0.0
    for tr, label in zip(runs.transcripts, runs.labels):
        diag = tr.diagnostics["algorithm"]
        alpha = diag["alpha_used"]
        for ph in diag["phases"]:
            if not ph["completed"]:
                continue
            phases += 1
            cost = tr.ledger.tags.get(f"phase:{ph['index']}", 0)
            bound = 8 * ph["calls"] + 2 * ph["final_interval"] + 1
            worst = max(worst, float(cost / alpha))
            if cost > bound:
                failures.append(f"{label} phase {ph['index']}: cost {float(cost):.3f} > {bound}")
    ok = not failures and worst <= 30
    detail = f"{phases} completed phases, max phase cost/alpha {worst:.3f}"
    if failures:
        detail += f"; {len(failures)} over bound, first {failures[0]}"
    return CriterionResult(6, "per-phase cost <= 8*calls + 2*final interval + 1", ok, detail)


def recurring_phase_end(runs: RecurringRuns) -> CriterionResult:
    phases = 0
    low = None
    for tr in runs.transcripts:
        for ph in tr.diagnostics["algorithm"]["phases"]:
            if ph["completed"]:
                phases += 1
                w = ph["min_w_at_end"]
                low = w if low is None else min(low, w)
    ok = phases > 0 and low >= 1
    return CriterionResult(7, "min W >= 1 at every phase end", ok,
                           f"{phases} phases, smallest end-of-phase min W = {low}")


# 8 ------------------------------------------------------------------------

def lower_bound_adversary() -> CriterionResult:
    rows = []
    ok = True
    digests = []
    for k in LB_KS:
        alpha = float(solve_alpha(k).alpha_used)
        for alg in _algorithms_for(k):
            tr = run(alg, LowerBoundAdversary(k))
            src = tr.diagnostics["source"]
            n_star = src["n_star"]
            opt = optimal_cost_dp(tr.instance).cost
            good = (n_star is not None and alpha / 2 - 1 <= n_star <= alpha and opt <= 4 + 1e-9
                    and tr.cost >= n_star and src["violation_count"] == 0)
            ok &= good
            digests.append(tr.digest())
            if not good:
                rows.append(f"{alg.spec}@{k}: n*={n_star} opt={float(opt):.3f} alg={float(tr.cost):.3f} "
                            f"violations={src['violation_count']}")
            else:
                rows.append(f"{alg.spec}@{k}: n*={n_star} alg/opt={float(tr.cost):.1f}/{float(opt):.3f}")
    detail = "; ".join(rows) if not ok else f"15 duels ok ({rows[4]}, {rows[-1]})"
    return CriterionResult(8, "lower-bound adversary: round count, OPT <= 4, ALG >= n*", ok, detail, digests=digests)


# 9 ------------------------------------------------------------------------

def match_all_remaining() -> CriterionResult:
    ok = True
    parts = []
    digests = []
    for k in MAR_KS:
        tr = run(TcpAckAlgorithm(), MarAdversary(k))
        ref = run(MarReferenceAlgorithm(k), FixedSource(tr.instance))
        a = len(tr.matches)
        root = math.sqrt(k)
        ratio = float(tr.cost / ref.cost)
        floor = root * (1 - (1 + 2 * root) / (a + k + 2 * root))
        good = tr.cost >= a + k - 1 and ref.cost <= 2 + a / root + root and ratio >= floor
        if k == 400:
            good &= ratio > 10
        ok &= good
        digests += [tr.digest(), ref.digest()]
        parts.append(f"k={k}: a={a} alg={tr.cost} ref={ref.cost} ratio={ratio:.2f} >= {floor:.2f}")
    return CriterionResult(9, "match-all-remaining separation against the reference", ok, "; ".join(parts),
                           digests=digests)


# 10 -----------------------------------------------------------------------

def case_iii_unbounded() -> CriterionResult:
    f = PenaltyFunction.from_zeros([2, 3])
    ok = True
    parts = []
    digests = []
    k_star = 2
    for alg_factory in (ImmediateAlgorithm, TcpAckAlgorithm, lambda: CeilDivAlgorithm(k_star),
                        lambda: MarReferenceAlgorithm(k_star), lambda: RecurringAlgorithm(k_star)):
        ratios = []
        for eps in CASE3_EPS:
            tr = run(alg_factory(), CaseIIIAdversary(f, eps))
            ratio, _ = _ratio(tr)
            good = ratio == math.inf or ratio >= 1 / (2 * k_star * eps)
            ok &= good
            ratios.append(ratio)
            digests.append(tr.digest())
        finite = [r for r in ratios if r != math.inf]
        if finite and not all(x < y for x, y in zip(finite, finite[1:])):
            ok = False
        if finite and len(finite) != len(ratios):
            ok = False  # a mix of finite and infinite ratios would break monotonicity
        name = alg_factory().spec
        shown = ",".join("inf" if r == math.inf else f"{float(r):.0f}" for r in ratios)
        parts.append(f"{name}=[{shown}]")
    return CriterionResult(10, "case (iii): ratio >= 1/(2k* eps) or infinite, growing as eps shrinks", ok,
                           " ".join(parts), digests=digests)


# 11 -----------------------------------------------------------------------

def numerics_identities() -> CriterionResult:
    errors = []
    for k, expected in ((27, 3), (256, 4), (3125, 5)):
        got = solve_alpha(k).alpha_exact
        if abs(got - expected) > 1e-12:
            errors.append(f"alpha({k}) = {got!r}")
    for k in range(1, 33):
        for lo in range(k):
            for hi in range(k):
                iv = CyclicInterval(lo, hi, k)
                members = list(iv)
                size = iv.size
                if size != (hi - lo) % k + 1 or len(set(members)) != size or members[0] != lo or members[-1] != hi:
                    errors.append(f"enumeration of [{lo},{hi}] mod {k}")
                if {x for x in range(k) if interval_contains(iv, x)} != set(members):
                    errors.append(f"membership of [{lo},{hi}] mod {k}")
                if any(iv.offset(x) != d for d, x in enumerate(members)):
                    errors.append(f"offsets of [{lo},{hi}] mod {k}")
                if size < k:
                    rest = CyclicInterval(hi + 1, lo - 1, k)
                    if rest.size != k - size or set(rest) & set(members):
                        errors.append(f"complement of [{lo},{hi}] mod {k}")
                if CyclicInterval(lo + k, hi - 3 * k, k) != iv:
                    errors.append(f"shift invariance of [{lo},{hi}] mod {k}")
    ok = not errors
    detail = "alpha(27,256,3125) = 3,4,5 within 1e-12; interval identities for k <= 32" if ok else "; ".join(errors[:5])
    return CriterionResult(11, "alpha solver and cyclic-interval identities", ok, detail)


# 12 -----------------------------------------------------------------------

def determinism(first_pass: List[CriterionResult], seed: int = 0) -> CriterionResult:
    """Re-run every transcript-producing criterion and compare digests."""
    again = _transcript_criteria(seed)
    before = _suite_digest(first_pass)
    after = _suite_digest(again)
    count = sum(len(r.digests) for r in first_pass)
    ok = before == after and count > 0
    return CriterionResult(12, "repeated runs give bit-identical transcripts", ok,
                           f"{count} transcripts, suite digest {before[:16]} {'==' if ok else '!='} {after[:16]}")


def _suite_digest(results: List[CriterionResult]) -> str:
    h = hashlib.sha256()
    for r in sorted(results, key=lambda r: r.number):
        for d in r.digests:
            h.update(d.encode())
    return h.hexdigest()


def _timed(fn: Callable, *args) -> CriterionResult:
    start = time.perf_counter()
    result = fn(*args)
    result.seconds = time.perf_counter() - start
    return result


def _transcript_criteria(seed: int) -> List[CriterionResult]:
    runs = RecurringRuns.collect(seed)
    return [
        _timed(tcp_ack_two_competitive, seed),
        _timed(ceil_div_two_competitive, seed),
        _timed(k_one_immediate, seed),
        _timed(recurring_invariants, runs),
        _timed(lower_bound_adversary),
        _timed(match_all_remaining),
        _timed(case_iii_unbounded),
    ]


def run_all(seed: int = 0, report: Callable[[str], None] = print) -> List[CriterionResult]:
    results = []

    def record(result):
        results.append(result)
        report(result.line())

    record(_timed(oracle_equivalence, seed))
    record(_timed(tcp_ack_two_competitive, seed))
    record(_timed(ceil_div_two_competitive, seed))
    record(_timed(k_one_immediate, seed))
    start = time.perf_counter()
    runs = RecurringRuns.collect(seed)
    collect_time = time.perf_counter() - start
    for fn in (recurring_invariants, recurring_phase_cost, recurring_phase_end):
        res = _timed(fn, runs)
        if fn is recurring_invariants:
            res.seconds += collect_time
        record(res)
    record(_timed(lower_bound_adversary))
    record(_timed(match_all_remaining))
    record(_timed(case_iii_unbounded))
    record(_timed(numerics_identities))
    record(_timed(determinism, results, seed))
    return results
