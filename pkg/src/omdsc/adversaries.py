"""Request sources: fixed schedules, Poisson arrivals and adaptive adversaries."""

from __future__ import annotations

import json
import math
import random
from fractions import Fraction
from typing import List, Optional

from .engine import ArrivalEvent, Instance, RequestSource
from .numerics import AlphaParam, CyclicInterval, solve_alpha
from .penalty import PenaltyFunction, case_iii_parameters
from .profile import WaitingProfile, time_to_threshold

EXACT_GRID = 2 ** 30


class FixedSource(RequestSource):
    """Replays a fixed instance and ignores what the algorithm does."""

    name = "fixed"

    def __init__(self, instance: Instance, spec: str = "fixed"):
        self.instance = instance
        self.penalty = instance.penalty
        self.spec = spec
        self.finalized = not instance.arrivals
        self._pos = 0
        self._times: list = []

    def start(self, backend):
        super().start(backend)
        self._times = [backend.num(ev.time) for ev in self.instance.arrivals]
        self._pos = 0
        self.finalized = not self._times

    def next_wakeup(self, now):
        if self._pos < len(self._times):
            return self._times[self._pos]
        return None

    def on_wakeup(self, now):
        out = []
        arrivals = self.instance.arrivals
        while self._pos < len(self._times) and self._times[self._pos] == now:
            out.append(arrivals[self._pos].count)
            self._pos += 1
        if self._pos >= len(self._times):
            self.finalized = True
        return out


def fixed_source(instance: Instance) -> FixedSource:
    return FixedSource(instance)


def poisson_times(rate, m: int, seed, exact: bool = True) -> list:
    """m cumulative exponential arrival times, snapped to a 2**-30 grid when exact."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    rng = random.Random(seed)
    t = 0.0
    out = []
    for _ in range(m):
        t += rng.expovariate(float(rate))
        out.append(Fraction(round(t * EXACT_GRID), EXACT_GRID) if exact else t)
    return out


class PoissonSource(FixedSource):
    """m single requests with exponential gaps; the schedule depends only on the seed."""

    name = "poisson"

    def __init__(self, rate, m: int, seed, penalty: Optional[PenaltyFunction] = None):
        if rate <= 0:
            raise ValueError("rate must be positive")
        if m < 0:
            raise ValueError("m must be nonnegative")
        self.rate, self.m, self.seed = rate, m, seed
        penalty = penalty or PenaltyFunction.constant_one()
        super().__init__(Instance([], penalty), spec=f"poisson:{rate},{m},{seed}")
        self.finalized = m == 0

    def start(self, backend):
        times = poisson_times(self.rate, self.m, self.seed, exact=backend.exact)
        self.instance = Instance([ArrivalEvent(t, 1, i) for i, t in enumerate(times)], self.penalty)
        super().start(backend)


def poisson_source(rate, m: int, seed, penalty: Optional[PenaltyFunction] = None) -> PoissonSource:
    return PoissonSource(rate, m, seed, penalty)


class CaseIIIAdversary(RequestSource):
    """Gives k* requests at time 0, then l - k* more at eps if all were matched
    strictly before eps.  Either way the instance ends at eps."""

    name = "case3"

    def __init__(self, penalty: PenaltyFunction, eps=Fraction(1, 1000)):
        self.k_star, self.ell = case_iii_parameters(penalty)
        self.penalty = penalty
        self.eps = eps
        self.spec = f"case3:{eps}"

    def start(self, backend):
        super().start(backend)
        self._eps = backend.num(self.eps)
        if self._eps <= 0:
            raise ValueError("eps must be positive")
        self.stage = 0
        self.matched_before_eps = 0
        self.emitted = 0
        self.finalized = False

    def next_wakeup(self, now):
        return (self.backend.zero, self._eps)[self.stage] if self.stage < 2 else None

    def on_wakeup(self, now):
        if self.stage == 0:
            self.stage = 1
            self.emitted = self.k_star
            return [self.k_star]
        self.stage = 2
        self.finalized = True
        if self.matched_before_eps >= self.k_star:
            self.emitted += self.ell - self.k_star
            return [self.ell - self.k_star]
        return []

    def on_match(self, now, size):
        if self.stage == 1 and now < self._eps:
            self.matched_before_eps += size
        return []

    def diagnostics(self):
        return {"k_star": self.k_star, "ell": self.ell, "eps": self.eps, "emitted": self.emitted,
                "extra_given": self.emitted > self.k_star}


def case_iii_adversary(penalty: PenaltyFunction, eps=Fraction(1, 1000)) -> CaseIIIAdversary:
    return CaseIIIAdversary(penalty, eps)


class MarAdversary(RequestSource):
    """k-1 requests at time 0, and k-1 more right after every match made before
    ``deadline``; the instance ends at ``deadline``."""

    name = "mar"

    def __init__(self, k: int, deadline=1, penalty: Optional[PenaltyFunction] = None):
        if k < 2:
            raise ValueError("k must be at least 2")
        self.k = k
        self.deadline = deadline
        self.penalty = penalty or PenaltyFunction.multiples_of(k)
        self.spec = f"mar:{k}"

    def start(self, backend):
        super().start(backend)
        self._deadline = backend.num(self.deadline)
        self.started = False
        self.finalized = False
        self.matches_before = 0
        self.emitted = 0

    def next_wakeup(self, now):
        if not self.started:
            return self.backend.zero
        return self._deadline

    def on_wakeup(self, now):
        if not self.started:
            self.started = True
            self.emitted += self.k - 1
            return [self.k - 1]
        if now >= self._deadline:
            self.finalized = True
        return []

    def on_match(self, now, size):
        if self.finalized or now >= self._deadline:
            return []
        self.matches_before += 1
        self.emitted += self.k - 1
        return [self.k - 1]

    def diagnostics(self):
        return {"k": self.k, "matches_before_deadline": self.matches_before, "emitted": self.emitted}


def mar_adversary(k: int, deadline=1) -> MarAdversary:
    return MarAdversary(k, deadline)


class DegenerateParametersError(ValueError):
    pass


class LowerBoundAdversary(RequestSource):
    """Adaptive adversary that shrinks an interval of residues round by round.

    Tracks the greedy waiting profile W against the requests it has given and
    the matches the algorithm has made.  A round ends when the algorithm
    matches a non-multiple of k (event b) or when W at a mod k has grown by 1
    since the previous event (event c); the instance is finalized as soon as
    the interval holds fewer than alpha**2 residues (event a).
    """

    name = "lb"

    def __init__(self, k: int, alpha: Optional[AlphaParam] = None, penalty: Optional[PenaltyFunction] = None,
                 check_invariants: bool = True):
        if k < 2:
            raise ValueError("k must be at least 2")
        self.k = k
        self.alpha_param = alpha or solve_alpha(k)
        if self.alpha_param.alpha_used ** 2 > k:
            raise DegenerateParametersError(f"alpha^2 = {float(self.alpha_param.alpha_used) ** 2:g} exceeds k = {k}")
        self.penalty = penalty or PenaltyFunction.multiples_of(k)
        self.check_invariants = check_invariants
        self.spec = f"lb:{k}"

    def start(self, backend):
        super().start(backend)
        self.alpha = self.alpha_param.value(backend)
        self.alpha_sq = self.alpha * self.alpha
        self.W = WaitingProfile(self.k, backend)
        self.a = 0
        self.p, self.q = 0, self.k - 1
        self.n = 0
        self.n_star = None
        self.started = False
        self.finalized = False
        self.anchor = backend.zero
        self.violations: List[str] = []
        self.rounds: list = []
        self.injected: list = []

    @property
    def abar(self) -> int:
        return self.a % self.k

    @property
    def size(self) -> int:
        return CyclicInterval(self.p, self.q, self.k).size

    # engine interface -----------------------------------------------------

    def next_wakeup(self, now):
        if not self.started:
            return self.backend.zero
        if self.finalized:
            return None
        dt = time_to_threshold(self.W, self.abar, self.anchor + 1)
        if dt is None:
            return None
        return self.W.last_update + dt

    def on_wakeup(self, now):
        if not self.started:
            self.started = True
            self.W.add_requests(self.k - 1)
            self._round_start("start")
            return [self.k - 1]
        if self.finalized:
            return []
        self.W.advance(now)
        if self.backend.ge(self.W[self.abar] - self.anchor, 1):
            h = self._h()
            self.p, self.q = self.q - h + 1, self.q
            self.n += 1
            self._round_start("c")
        return []

    def on_match(self, now, size):
        self.W.advance(now)
        self.a += size
        if self.finalized or size % self.k == 0:
            return []
        h = self._h()
        q = self.q
        if self.abar not in CyclicInterval(q - h + 1, q, self.k):
            self.p, self.q = q - h + 1, q
        else:
            self.p, self.q = q - 2 * h + 1, q - h
        give = (self.q - self.W.s) % self.k
        self.W.add_requests(give)
        self.injected.append(give)
        self.n += 1
        self._round_start("b")
        return [give] if give else []

    def close(self, now):
        self.finalized = True

    def diagnostics(self):
        return {
            "k": self.k,
            "alpha_used": self.alpha_param.alpha_used,
            "n_star": self.n_star,
            "rounds": self.rounds,
            "violation_count": len(self.violations),
            "violations": self.violations[:50],
        }

    # rounds ---------------------------------------------------------------

    def _h(self) -> int:
        return math.ceil(self.size / self.alpha_sq)

    def _round_start(self, event: str):
        self.p %= self.k
        self.q %= self.k
        self.anchor = self.W[self.abar]
        self.rounds.append({"n": self.n, "event": event, "t": self.W.last_update,
                            "p": self.p, "q": self.q, "size": self.size})
        if self.check_invariants:
            self._check_round()
        if self.size < self.alpha_sq:
            self.n_star = self.n
            self.finalized = True

    def _check_round(self):
        k, n, size = self.k, self.n, self.size
        le = self.backend.le
        if not (le(k / self.alpha ** (2 * n), size) and le(size, k / self.alpha ** n)):
            self._violation(f"interval size {size} outside [k/alpha^{2 * n}, k/alpha^{n}]")
        cap = 2 * n / self.alpha
        snap = self.W.snapshot()
        high = snap.above(cap, CyclicInterval(self.p, self.q, k))
        if high:
            self._violation(f"W_{high[0]}={snap[high[0]]} exceeds 2n/alpha={cap}")
        if self.abar not in CyclicInterval(self.q + 1, self.p, k):
            self._violation(f"a mod k = {self.abar} not in [q+1, p] = [{(self.q + 1) % k}, {self.p}]")
        if self.W.s_bar != self.q:
            self._violation(f"s mod k = {self.W.s_bar} differs from q = {self.q}")

    def _violation(self, message: str):
        self.violations.append(f"round {self.n} t={self.W.last_update}: {message}")


def lb_adversary(k: int, alpha: Optional[AlphaParam] = None) -> LowerBoundAdversary:
    return LowerBoundAdversary(k, alpha)


def parse_source(spec: str, penalty: Optional[PenaltyFunction] = None) -> RequestSource:
    """Build a source from ``fixed:<file>``, ``poisson:rate,m,seed``,
    ``case3:eps``, ``mar:k`` or ``lb:k``."""
    name, _, arg = spec.partition(":")
    if name == "fixed":
        with open(arg) as fh:
            instance = Instance.from_json(json.load(fh))
        if penalty is not None:
            instance = Instance(instance.arrivals, penalty)
        return FixedSource(instance, spec=spec)
    if name == "poisson":
        rate, m, seed = arg.split(",")
        return PoissonSource(Fraction(rate), int(m), int(seed), penalty)
    if name == "case3":
        if penalty is None:
            penalty = PenaltyFunction.from_zeros([2, 3])
        return CaseIIIAdversary(penalty, Fraction(arg) if arg else Fraction(1, 1000))
    if name == "mar":
        return MarAdversary(int(arg), penalty=penalty)
    if name == "lb":
        return LowerBoundAdversary(int(arg), penalty=penalty)
    raise ValueError(f"unknown source {spec!r}")
