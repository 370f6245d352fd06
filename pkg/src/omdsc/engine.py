"""Continuous-time, event-driven simulation of one online algorithm against one
request source.

Algorithms and sources are pull-based.  An algorithm answers
``on_arrival(now, count)`` and ``on_wakeup(now)`` with match directives
(counts, optionally tagged) and reports ``next_wakeup(now)``, which is only
valid until the next arrival.  A source reports ``next_wakeup(now)``, returns
arrival batches from ``on_wakeup(now)``, and may inject batches at the same
timestamp from ``on_match(now, size)``.  The engine matches FIFO-oldest
requests and accrues waiting cost continuously at the unmatched count.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

from .numerics import EXACT, Backend, Scalar, competitive_ratio, format_scalar, get_backend, parse_scalar
from .penalty import PenaltyFunction
from .profile import TimeRegressionError, WaitingProfile, advance_profile, time_to_threshold

__all__ = [
    "ArrivalEvent", "Instance", "MatchRecord", "CostLedger", "Transcript", "Directive",
    "OnlineAlgorithm", "RequestSource", "ProtocolError", "run", "competitive_ratio",
    "WaitingProfile", "advance_profile", "time_to_threshold", "TimeRegressionError",
]

DEFAULT_MAX_EVENTS = 5_000_000


class ProtocolError(RuntimeError):
    """An algorithm or source broke the engine contract."""


class _EventBudgetExceeded(Exception):
    pass


@dataclass(frozen=True)
class ArrivalEvent:
    time: Scalar
    count: int
    seq: int = 0


@dataclass
class Instance:
    arrivals: List[ArrivalEvent]
    penalty: PenaltyFunction
    finalized: bool = True

    def __post_init__(self):
        last = None
        for ev in self.arrivals:
            if ev.count < 1:
                raise ValueError(f"arrival count must be positive, got {ev.count}")
            if ev.time < 0:
                raise ValueError("arrival times must be nonnegative")
            if last is not None and ev.time < last:
                raise ValueError("arrival times must be nondecreasing")
            last = ev.time

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple], penalty: PenaltyFunction, backend: Backend = EXACT) -> "Instance":
        arrivals = [ArrivalEvent(backend.num(t), int(c), seq) for seq, (t, c) in enumerate(pairs)]
        return cls(arrivals, penalty)

    @property
    def m(self) -> int:
        return sum(ev.count for ev in self.arrivals)

    def request_times(self) -> list:
        out = []
        for ev in self.arrivals:
            out.extend([ev.time] * ev.count)
        return out

    def to_json(self) -> dict:
        return {
            "penalty": self.penalty.to_json(),
            "arrivals": [{"t": format_scalar(ev.time), "count": ev.count} for ev in self.arrivals],
        }

    @classmethod
    def from_json(cls, data: dict, backend: Backend = EXACT) -> "Instance":
        penalty = PenaltyFunction.from_json(data["penalty"])
        pairs = [(parse_scalar(a["t"], backend), a.get("count", 1)) for a in data["arrivals"]]
        return cls.from_pairs(pairs, penalty, backend)


@dataclass(frozen=True)
class MatchRecord:
    time: Scalar
    size: int
    size_cost: Scalar
    first: int  # arrival index of the oldest member
    tags: tuple = ()

    @property
    def members(self) -> range:
        return range(self.first, self.first + self.size)


@dataclass
class CostLedger:
    size_cost_total: Scalar
    waiting_cost_total: Scalar
    tags: dict = field(default_factory=dict)

    @property
    def total(self) -> Scalar:
        return self.size_cost_total + self.waiting_cost_total

    def charge(self, amount: Scalar, tags: Sequence[str], kind: str):
        if kind == "size":
            self.size_cost_total += amount
        else:
            self.waiting_cost_total += amount
        for tag in tags:
            self.tags[tag] = self.tags.get(tag, 0) + amount


@dataclass(frozen=True)
class Directive:
    count: int
    tags: tuple = ()


def _as_directive(d) -> Directive:
    return d if isinstance(d, Directive) else Directive(int(d))


class OnlineAlgorithm:
    """Base class with no-op defaults; subclasses override what they need."""

    name = "algorithm"

    def start(self, penalty: PenaltyFunction, backend: Backend):
        self.penalty = penalty
        self.backend = backend

    def on_arrival(self, now: Scalar, count: int) -> list:
        return []

    def next_wakeup(self, now: Scalar) -> Optional[Scalar]:
        return None

    def on_wakeup(self, now: Scalar) -> list:
        return []

    def cost_tags(self) -> tuple:
        return ()

    def diagnostics(self) -> dict:
        return {}


class RequestSource:
    name = "source"
    penalty: Optional[PenaltyFunction] = None
    finalized = False

    def start(self, backend: Backend):
        self.backend = backend

    def next_wakeup(self, now: Scalar) -> Optional[Scalar]:
        return None

    def on_wakeup(self, now: Scalar) -> list:
        return []

    def on_match(self, now: Scalar, size: int) -> list:
        return []

    def close(self, now: Scalar):
        self.finalized = True

    def diagnostics(self) -> dict:
        return {}


@dataclass
class Transcript:
    instance: Instance
    matches: List[MatchRecord]
    ledger: CostLedger
    termination: str
    backend: str
    algorithm: str = ""
    source: str = ""
    events: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def cost(self) -> Scalar:
        return self.ledger.total

    def matched_count(self) -> int:
        return sum(m.size for m in self.matches)

    def waiting_by_matches(self) -> Scalar:
        """Waiting cost re-derived per match as sum(tau_j - t_v) over members."""
        times = self.instance.request_times()
        prefix = [0]
        for t in times:
            prefix.append(prefix[-1] + t)
        total = 0
        for m in self.matches:
            total += m.size * m.time - (prefix[m.first + m.size] - prefix[m.first])
        return total

    def to_json(self) -> dict:
        return {
            "backend": self.backend,
            "algorithm": self.algorithm,
            "source": self.source,
            "termination": self.termination,
            "events": self.events,
            "instance": self.instance.to_json(),
            "matches": [
                {"t": format_scalar(m.time), "size": m.size, "size_cost": format_scalar(m.size_cost),
                 "first": m.first, **({"tags": list(m.tags)} if m.tags else {})}
                for m in self.matches
            ],
            "ledger": {
                "size_cost": format_scalar(self.ledger.size_cost_total),
                "waiting_cost": format_scalar(self.ledger.waiting_cost_total),
                "total": format_scalar(self.ledger.total),
                "tags": {k: format_scalar(v) for k, v in sorted(self.ledger.tags.items())},
            },
            "diagnostics": _jsonable(self.diagnostics),
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return format_scalar(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


class _Run:
    def __init__(self, algorithm, source, penalty, backend, max_events, horizon_time):
        self.alg = algorithm
        self.src = source
        self.penalty = penalty
        self.backend = backend
        self.max_events = max_events
        self.horizon_time = horizon_time
        self.now = backend.zero
        self.arrivals: List[ArrivalEvent] = []
        self.queue = deque()  # [time, remaining count, first arrival index]
        self.unmatched = 0
        self.next_index = 0
        self.matches: List[MatchRecord] = []
        self.ledger = CostLedger(backend.zero, backend.zero)
        self.pending = deque()
        self.events = 0

    def deliver_pending(self):
        while self.pending:
            self.tick()
            count = self.pending.popleft()
            if count < 1:
                raise ProtocolError(f"source produced a non-positive arrival count {count}")
            self.arrivals.append(ArrivalEvent(self.now, count, len(self.arrivals)))
            self.queue.append([self.now, count, self.next_index])
            self.next_index += count
            self.unmatched += count
            self.apply(self.alg.on_arrival(self.now, count))

    def tick(self):
        self.events += 1
        if self.events > self.max_events:
            raise _EventBudgetExceeded

    def apply(self, directives):
        for raw in directives or ():
            d = _as_directive(raw)
            if d.count < 1:
                raise ProtocolError(f"match directive of size {d.count}")
            if d.count > self.unmatched:
                raise ProtocolError(f"directive matches {d.count} but only {self.unmatched} are unmatched")
            first = self.queue[0][2]
            left = d.count
            while left:
                head = self.queue[0]
                take = min(left, head[1])
                head[1] -= take
                head[2] += take
                left -= take
                if head[1] == 0:
                    self.queue.popleft()
            self.unmatched -= d.count
            cost = self.penalty.value(d.count, self.backend)
            self.matches.append(MatchRecord(self.now, d.count, cost, first, d.tags))
            self.ledger.charge(cost, d.tags, "size")
            injected = self.src.on_match(self.now, d.count)
            if injected:
                self.pending.extend(injected)

    def accrue(self, to):
        dt = to - self.now
        if dt < 0:
            raise ProtocolError(f"time moved backwards from {self.now} to {to}")
        if dt and self.unmatched:
            self.ledger.charge(self.unmatched * dt, self.alg.cost_tags(), "waiting")
        self.now = to

    def flush(self):
        if self.unmatched:
            d = Directive(self.unmatched, ("horizon_flush",))
            self.apply([d])
            self.pending.clear()

    def loop(self) -> str:
        try:
            return self._loop()
        except _EventBudgetExceeded:
            self.pending.clear()
            self.flush()
            return "horizon_flush"

    def _loop(self) -> str:
        while True:
            t_src = None if self.src.finalized else self.src.next_wakeup(self.now)
            t_alg = self.alg.next_wakeup(self.now)
            if t_alg is not None and t_alg < self.now:
                raise ProtocolError(f"algorithm asked to wake at {t_alg} < now {self.now}")
            if t_src is not None and t_src < self.now:
                raise ProtocolError(f"source asked to wake at {t_src} < now {self.now}")
            if self.src.finalized and self.unmatched == 0 and t_alg is None:
                return "normal"
            candidates = [t for t in (t_src, t_alg) if t is not None]
            if not candidates:
                if self.unmatched:
                    raise ProtocolError(f"algorithm stalled with {self.unmatched} unmatched requests at {self.now}")
                self.src.close(self.now)
                return "normal"
            t_next = min(candidates)
            if self.horizon_time is not None and t_next > self.horizon_time:
                self.accrue(max(self.now, self.horizon_time))
                self.flush()
                return "horizon_flush"
            self.tick()
            self.accrue(t_next)
            if t_src is not None and t_src == self.now:
                self.pending.extend(self.src.on_wakeup(self.now))
                self.deliver_pending()
            if t_alg is not None and t_alg == self.now:
                self.apply(self.alg.on_wakeup(self.now))
                self.deliver_pending()


def run(algorithm: OnlineAlgorithm, source: RequestSource, *, penalty: Optional[PenaltyFunction] = None,
        backend=EXACT, max_events: int = DEFAULT_MAX_EVENTS, horizon_time=None) -> Transcript:
    """Simulate ``algorithm`` against ``source`` and return the full transcript."""
    backend = get_backend(backend)
    penalty = penalty or source.penalty
    if penalty is None:
        raise ValueError("no penalty given and the source does not carry one")
    source.start(backend)
    algorithm.start(penalty, backend)
    state = _Run(algorithm, source, penalty, backend, max_events,
                 None if horizon_time is None else backend.num(horizon_time))
    termination = state.loop()
    instance = Instance(list(state.arrivals), penalty, finalized=True)
    diagnostics = {"algorithm": algorithm.diagnostics(), "source": source.diagnostics()}
    return Transcript(instance, state.matches, state.ledger, termination, backend.name,
                      algorithm=getattr(algorithm, "spec", algorithm.name),
                      source=getattr(source, "spec", source.name),
                      events=state.events, diagnostics=diagnostics)
