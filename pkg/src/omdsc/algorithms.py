"""Online algorithms: immediate matching, the acknowledgment rule, the
ceil(n/k) rule, the sqrt(k) reference algorithm, and the recurring algorithm."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional

from .engine import Directive, OnlineAlgorithm
from .numerics import AlphaParam, CyclicInterval, Scalar, solve_alpha
from .profile import WaitingProfile, time_to_threshold


class ImmediateAlgorithm(OnlineAlgorithm):
    """Matches every request on its own the moment it arrives."""

    name = spec = "immediate"

    def on_arrival(self, now, count):
        return [1] * count


class _ThresholdAlgorithm(OnlineAlgorithm):
    """Shared bookkeeping for rules driven by waiting accrued since the last match."""

    def start(self, penalty, backend):
        super().start(penalty, backend)
        self.unmatched = 0
        self.waited = backend.zero
        self.last = backend.zero

    def _sync(self, now) -> list:
        self.waited += self.unmatched * (now - self.last)
        self.last = now
        if self.unmatched and self.backend.ge(self.waited, 1):
            return self._match(self.unmatched)
        return []

    def _match(self, count) -> list:
        self.unmatched -= count
        self.waited = self.backend.zero
        return [count]

    def next_wakeup(self, now):
        if not self.unmatched:
            return None
        return self.last + (1 - self.waited) / self.unmatched

    def on_wakeup(self, now):
        return self._sync(now)


class TcpAckAlgorithm(_ThresholdAlgorithm):
    """Matches everything once waiting since the last match reaches 1."""

    name = spec = "tcp_ack"

    def on_arrival(self, now, count):
        out = self._sync(now)
        self.unmatched += count
        return out


class CeilDivAlgorithm(_ThresholdAlgorithm):
    """The acknowledgment rule plus: match k whenever at least k are waiting.

    The waiting counter restarts on every match, size-k ones included.
    """

    name = "ceil_div"

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("k must be positive")
        self.k = k
        self.spec = f"ceil_div:{k}"

    def on_arrival(self, now, count):
        out = self._sync(now)
        self.unmatched += count
        while self.unmatched >= self.k:
            out += self._match(self.k)
        return out


class MarReferenceAlgorithm(OnlineAlgorithm):
    """Reference algorithm for the match-all-remaining separation.

    Matches k whenever at least k wait, trims a backlog of exactly k-1 down
    to floor(sqrt(k)), and flushes everything at ``deadline`` (and on any
    arrival after it).
    """

    name = "mar_ref"

    def __init__(self, k: int, deadline=1):
        if k < 2:
            raise ValueError("k must be at least 2")
        self.k = k
        self.keep = math.isqrt(k)
        self.deadline = deadline
        self.spec = f"mar_ref:{k}"

    def start(self, penalty, backend):
        super().start(penalty, backend)
        self.unmatched = 0
        self._deadline = backend.num(self.deadline)

    def on_arrival(self, now, count):
        self.unmatched += count
        out = []
        if now >= self._deadline:
            out.append(self.unmatched)
            self.unmatched = 0
            return out
        while self.unmatched >= self.k:
            out.append(self.k)
            self.unmatched -= self.k
        if self.unmatched == self.k - 1 and self.k - 1 - self.keep > 0:
            out.append(self.k - 1 - self.keep)
            self.unmatched = self.keep
        return out

    def next_wakeup(self, now):
        if self.unmatched and now <= self._deadline:
            return self._deadline
        return None

    def on_wakeup(self, now):
        if self.unmatched and now >= self._deadline:
            count, self.unmatched = self.unmatched, 0
            return [count]
        return []


# recurring algorithm ---------------------------------------------------------

ENTER = "enter"
P1 = "p1"
P3 = "p3"
P5 = "p5"
P6 = "p6"
STEP1 = "step1"


@dataclass
class PhaseRecord:
    index: int
    start: Scalar
    end: Optional[Scalar] = None
    calls: int = 0
    exit_reason: Optional[str] = None
    final_interval: Optional[int] = None
    step1_matches: int = 0
    min_w_at_end: Optional[Scalar] = None
    completed: bool = False


class RecurringAlgorithm(OnlineAlgorithm):
    """Phase-based algorithm for penalties that vanish exactly on multiples of k.

    Each phase drives every W_i to at least 1 while paying O(alpha): the
    recursion ``recurring([p, q], l)`` runs as a flat state machine over the
    program points ENTER, P1, P3, P5, P6 and the wrap-up STEP1.  All waits
    are thresholds on a single W entry, so wake-up times are closed-form;
    conditions on s mod k are re-checked whenever requests arrive.
    """

    name = "recurring"

    def __init__(self, k: int, alpha: Optional[AlphaParam] = None, check_invariants: bool = True):
        if k < 2:
            raise ValueError("k must be at least 2")
        self.k = k
        self.alpha_param = alpha or solve_alpha(k)
        self.check_invariants = check_invariants
        self.spec = f"recurring:{k}"

    # lifecycle ------------------------------------------------------------

    def start(self, penalty, backend):
        super().start(penalty, backend)
        self.alpha = self.alpha_param.value(backend)
        self.level_cap = math.ceil(self.alpha_param.alpha_used)
        self.phase = -1
        self.phases: List[PhaseRecord] = []
        self.violations: List[str] = []
        self.calls_total = 0
        self._out: list = []
        self._new_phase(backend.zero)

    def _new_phase(self, now):
        self.phase += 1
        self.phases.append(PhaseRecord(self.phase, now))
        self.W = WaitingProfile(self.k, self.backend, start=now)
        self.a = 0
        self.p = self.q = self.l = None
        self.pp = self.qp = None
        self.anchor = self.backend.zero
        self._call(0, self.k - 1, 0)

    # engine interface -----------------------------------------------------

    def on_arrival(self, now, count):
        self._out = []
        self.W.advance(now)
        self._run()
        self.W.add_requests(count)
        while self.W.s - self.a >= self.k:
            self._emit(self.k, "global")
        self._run()
        self._check_backlog()
        return self._out

    def on_wakeup(self, now):
        self._out = []
        self.W.advance(now)
        self._run()
        self._check_backlog()
        return self._out

    def next_wakeup(self, now):
        target = self._blocking_threshold()
        if target is None:
            return None
        index, value = target
        dt = time_to_threshold(self.W, index, value)
        if dt is None:
            return None
        return self.W.last_update + dt

    def cost_tags(self):
        return (f"phase:{self.phase}", f"line:{self.line}")

    def diagnostics(self):
        phases = [asdict(p) for p in self.phases]
        return {
            "k": self.k,
            "alpha_used": self.alpha_param.alpha_used,
            "phases": phases,
            "recursion_calls": self.calls_total,
            "violation_count": len(self.violations),
            "violations": self.violations[:50],
        }

    # helpers --------------------------------------------------------------

    @property
    def abar(self) -> int:
        return self.a % self.k

    def _thr(self, level: int):
        return level / self.alpha

    def _gained(self, i: int, amount) -> bool:
        return self.backend.ge(self.W[i] - self.anchor, amount)

    def _emit(self, count: int, line: str):
        self.a += count
        self._out.append(Directive(count, (f"phase:{self.phase}", f"line:{line}")))

    def _violation(self, message: str):
        self.violations.append(f"phase {self.phase} t={self.W.last_update}: {message}")

    def _check_backlog(self):
        backlog = self.W.s - self.a
        if not 0 <= backlog < self.k:
            self._violation(f"unmatched count {backlog} outside [0, k)")

    def _blocking_threshold(self):
        line = self.line
        if line in (P1, P5):
            return self.abar, self.anchor + 2
        if line == P3:
            return self.p, self.anchor + 1
        if line == P6:
            return self.pp, self.anchor + 1
        if line == STEP1:
            if self.W.s > self.a:
                return self.abar, self.backend.num(1)
            return None
        return None

    # recursion ------------------------------------------------------------

    def _call(self, p: int, q: int, l: int):
        if self.check_invariants and self.l is not None:
            old = CyclicInterval(self.p, self.q, self.k).size
            new = CyclicInterval(p, q, self.k).size
            if not (l == self.l + 1 or (l == self.l and new <= math.floor(2 * old / self.alpha) + 1)):
                self._violation(f"call ({p},{q},{l}) from ({self.p},{self.q},{self.l}) breaks the shrink law")
        self.p, self.q, self.l = p % self.k, q % self.k, l
        self.line = ENTER

    def _enter(self):
        record = self.phases[-1]
        record.calls += 1
        self.calls_total += 1
        interval = CyclicInterval(self.p, self.q, self.k)
        if self.check_invariants:
            self._check_entry(interval)
        if interval.size <= self.alpha or self.l >= self.alpha:
            record.exit_reason = "size" if interval.size <= self.alpha else "level"
            record.final_interval = interval.size
            self.line = STEP1
        else:
            self.line = P1
            self.anchor = self.W[self.abar]

    def _check_entry(self, interval: CyclicInterval):
        snap = self.W.snapshot()
        inside = list(interval)
        outside = CyclicInterval(self.q + 1, self.p - 1, self.k) if interval.size < self.k else ()
        low = snap.below(self._thr(self.l), inside)
        if low:
            self._violation(f"W_{low[0]}={snap[low[0]]} < l/alpha inside [{self.p},{self.q}] at l={self.l}")
        low = snap.below(1, outside)
        if low:
            self._violation(f"W_{low[0]}={snap[low[0]]} < 1 outside [{self.p},{self.q}]")
        if self.abar != self.p:
            self._violation(f"a mod k = {self.abar} differs from p = {self.p}")
        if not 0 <= self.l <= self.level_cap:
            self._violation(f"level {self.l} outside 0..{self.level_cap}")

    def _deficient(self, p: int, q: int, threshold) -> list:
        return self.W.snapshot().below(threshold, CyclicInterval(p, q, self.k))

    def _run(self):
        k = self.k
        while True:
            line = self.line
            if line == ENTER:
                self._enter()
            elif line == P1:
                if not self._gained(self.abar, 2):
                    return
                deficient = self._deficient(self.p, self.q, self._thr(self.l + 1))
                if not deficient:
                    self._call(self.p, self.q, self.l + 1)
                    continue
                # iteration order runs forward from p, so these are the
                # argmin/argmax of (i - p) mod k over deficient indices
                self.pp, self.qp = deficient[0], deficient[-1]
                self.line = P3
                self.anchor = self.W[self.p]
            elif line == P3:
                if self._gained(self.p, 1):
                    self._call(self.p, self.q, self.l + 1)
                elif self.W.s_bar in CyclicInterval(self.pp, self.p - 1, k):
                    self._emit((self.pp - self.a) % k, "p4")
                    self.line = P5
                    self.anchor = self.W[self.abar]
                else:
                    return
            elif line == P5:
                if not self._gained(self.abar, 2):
                    return
                if not self._deficient(self.pp, self.qp, self._thr(self.l + 1)):
                    self.line = P6
                    self.anchor = self.W[self.pp]
                else:
                    size = CyclicInterval(self.p, self.q, k).size
                    j = (self.pp + math.floor(2 * size / self.alpha)) % k
                    r = j if (j - self.pp) % k <= (self.q - self.pp) % k else self.q
                    self._call(self.pp, r, self.l)
            elif line == P6:
                if self._gained(self.pp, 1):
                    self._call(self.abar, self.q, self.l + 1)
                elif self.W.s_bar in CyclicInterval(self.p, self.pp - 1, k):
                    self._emit((self.p - self.a) % k, "p7")
                    self._call(self.abar, self.q, self.l + 1)
                else:
                    return
            elif line == STEP1:
                if not (self.W.s > self.a and self.backend.ge(self.W[self.abar], 1)):
                    return
                self._emit(1, "step1")
                self.phases[-1].step1_matches += 1
                if not self.W.snapshot().below(1):
                    self._finish_phase()
            else:  # pragma: no cover
                raise RuntimeError(f"unknown program point {line!r}")

    def _finish_phase(self):
        record = self.phases[-1]
        now = self.W.last_update
        low = self.W.snapshot().minimum()
        record.min_w_at_end = low
        if self.check_invariants and not self.backend.ge(low, 1):
            self._violation(f"phase ended with min W = {low} < 1")
        remaining = self.W.s - self.a
        if remaining:
            self._emit(remaining, "step3")
        record.end = now
        record.completed = True
        self._new_phase(now)


def parse_algorithm(spec: str) -> OnlineAlgorithm:
    """Build an algorithm from ``immediate``, ``tcp_ack``, ``ceil_div:k``,
    ``mar_ref:k`` or ``recurring:k[,alpha=p/q]``."""
    from fractions import Fraction

    name, _, arg = spec.partition(":")
    if name == "immediate":
        return ImmediateAlgorithm()
    if name == "tcp_ack":
        return TcpAckAlgorithm()
    if name == "ceil_div":
        return CeilDivAlgorithm(int(arg))
    if name == "mar_ref":
        return MarReferenceAlgorithm(int(arg))
    if name == "recurring":
        parts = arg.split(",")
        k = int(parts[0])
        alpha = None
        for extra in parts[1:]:
            key, _, value = extra.partition("=")
            if key.strip() != "alpha":
                raise ValueError(f"unknown recurring option {key!r}")
            used = Fraction(value.strip())
            base = solve_alpha(k)
            alpha = AlphaParam(k=k, alpha_exact=base.alpha_exact, alpha_used=used)
        alg = RecurringAlgorithm(k, alpha)
        alg.spec = spec
        return alg
    raise ValueError(f"unknown algorithm {spec!r}")
