"""Offline optimum: a consecutive-grouping DP and an exhaustive oracle.

With requests sorted by arrival time, some optimal schedule matches
consecutive runs of requests, each at the arrival time of its last member
(swapping members between groups never helps, and delaying a match only adds
waiting).  The DP below searches exactly those schedules; the brute-force
oracle searches every set partition and is what the DP is tested against.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from .engine import Instance
from .penalty import PenaltyFunction, classify, effective_penalty_table

BRUTE_FORCE_LIMIT = 10


@dataclass
class OfflineSolution:
    cost: object
    groups: List[Tuple[range, object]] = field(default_factory=list)
    method: str = "dp"

    def to_json(self) -> dict:
        from .numerics import format_scalar

        return {
            "cost": format_scalar(self.cost),
            "method": self.method,
            "groups": [{"first": g.start, "size": len(g), "t": format_scalar(t)} for g, t in self.groups],
        }


def _sorted_times(instance: Instance) -> list:
    if not instance.finalized:
        raise ValueError("offline optimum needs a finalized instance")
    return sorted(instance.request_times())


def _groups_from_parents(parent: list, times: list) -> list:
    groups = []
    i = len(times)
    while i > 0:
        j = parent[i]
        groups.append((range(j, i), times[i - 1]))
        i = j
    groups.reverse()
    return groups


def optimal_cost_dp(instance: Instance, f: Optional[PenaltyFunction] = None, method: str = "auto") -> OfflineSolution:
    """Minimum offline cost.

    ``method`` is ``"auto"``, ``"quadratic"`` or ``"hull"``.  The hull variant
    applies to binary penalties whose zero set is empty or all multiples of k
    and runs in linear time; auto picks it when it applies.
    """
    f = f or instance.penalty
    times = _sorted_times(instance)
    m = len(times)
    if m == 0:
        return OfflineSolution(0, [], "dp")
    hull_ok = f.mode == "binary" and classify(f).variant in ("I", "II")
    if method == "hull" and not hull_ok:
        raise ValueError("the hull DP needs a binary penalty in case (i) or (ii)")
    if method == "hull" or (method == "auto" and hull_ok):
        cost, parent = _hull_dp(times, classify(f).k)
    else:
        cost, parent = _quadratic_dp(times, effective_penalty_table(f, m))
    return OfflineSolution(cost, _groups_from_parents(parent, times), "dp")


def _prefix(times: list) -> list:
    prefix = [0]
    for t in times:
        prefix.append(prefix[-1] + t)
    return prefix


def _quadratic_dp(times: list, g: list):
    m = len(times)
    prefix = _prefix(times)
    dp = [0] * (m + 1)
    parent = [0] * (m + 1)
    for i in range(1, m + 1):
        t = times[i - 1]
        best, arg = None, 0
        for j in range(i):
            cand = dp[j] + g[i - j] + (i - j) * t - (prefix[i] - prefix[j])
            if best is None or cand < best:
                best, arg = cand, j
        dp[i], parent[i] = best, arg
    return dp[m], parent


class _MonotoneHull:
    """Lower envelope of lines y = slope*x + icpt, slopes added in decreasing
    order and queried at nondecreasing x."""

    def __init__(self):
        self.lines: list = []
        self.head = 0

    def add(self, slope, icpt, tag):
        lines = self.lines
        while len(lines) - self.head >= 2:
            m1, b1, _ = lines[-2]
            m2, b2, _ = lines[-1]
            if (icpt - b1) * (m1 - m2) <= (b2 - b1) * (m1 - slope):
                lines.pop()
            else:
                break
        lines.append((slope, icpt, tag))

    def query(self, x):
        lines = self.lines
        if self.head >= len(lines):
            return None
        while self.head + 1 < len(lines):
            m1, b1, _ = lines[self.head]
            m2, b2, _ = lines[self.head + 1]
            if m2 * x + b2 <= m1 * x + b1:
                self.head += 1
            else:
                break
        m, b, tag = lines[self.head]
        return m * x + b, tag


def _hull_dp(times: list, k: Optional[int]):
    # dp[i] = i*t_i - P[i] + min over j < i of (dp[j] + P[j] - j*t_i) + [i-j not a multiple of k]
    m = len(times)
    prefix = _prefix(times)
    dp = [0] * (m + 1)
    parent = [0] * (m + 1)
    every = _MonotoneHull()
    by_residue = {}
    every.add(0, 0, 0)
    if k:
        by_residue[0] = _MonotoneHull()
        by_residue[0].add(0, 0, 0)
    for i in range(1, m + 1):
        t = times[i - 1]
        best, arg = every.query(t)
        best += 1
        if k:
            hull = by_residue.get(i % k)
            hit = hull.query(t) if hull else None
            if hit is not None and hit[0] <= best:
                best, arg = hit
        dp[i] = best + i * t - prefix[i]
        parent[i] = arg
        icpt = dp[i] + prefix[i]
        every.add(-i, icpt, i)
        if k:
            by_residue.setdefault(i % k, _MonotoneHull()).add(-i, icpt, i)
    return dp[m], parent


def _set_partitions(n: int):
    """Restricted growth strings of length n."""
    if n == 0:
        yield []
        return
    labels = [0] * n

    def rec(i, used):
        if i == n:
            yield list(labels)
            return
        for b in range(used + 1):
            labels[i] = b
            yield from rec(i + 1, max(used, b + 1))

    yield from rec(1, 1) if n else iter(())


def brute_force_opt(instance: Instance, f: Optional[PenaltyFunction] = None) -> OfflineSolution:
    """Minimum over every set partition, each block matched at its latest arrival."""
    f = f or instance.penalty
    times = _sorted_times(instance)
    m = len(times)
    if m > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force is limited to {BRUTE_FORCE_LIMIT} requests, got {m}")
    if m == 0:
        return OfflineSolution(0, [], "brute_force")
    g = effective_penalty_table(f, m)
    best, best_labels = None, None
    for labels in _set_partitions(m):
        blocks = {}
        for idx, b in enumerate(labels):
            blocks.setdefault(b, []).append(idx)
        cost = 0
        for members in blocks.values():
            latest = times[members[-1]]
            cost += g[len(members)] + sum(latest - times[v] for v in members)
        if best is None or cost < best:
            best, best_labels = cost, labels
    groups = _label_groups(best_labels, times)
    return OfflineSolution(best, groups, "brute_force")


def _label_groups(labels: list, times: list) -> list:
    blocks = {}
    for idx, b in enumerate(labels):
        blocks.setdefault(b, []).append(idx)
    out = []
    for members in blocks.values():
        if members == list(range(members[0], members[-1] + 1)):
            out.append((range(members[0], members[-1] + 1), times[members[-1]]))
        else:
            out.append((tuple(members), times[members[-1]]))
    return out


def brute_force_with_delays(instance: Instance, delays: Sequence, f: Optional[PenaltyFunction] = None):
    """Like brute force, but each block may also be matched ``d`` after its
    latest arrival for every ``d`` in ``delays``.  Used to confirm that
    delaying a match never lowers the optimum."""
    f = f or instance.penalty
    times = _sorted_times(instance)
    m = len(times)
    if m > 7:
        raise ValueError("delay enumeration is limited to 7 requests")
    if m == 0:
        return 0
    g = effective_penalty_table(f, m)
    options = [0] + [d for d in delays if d > 0]
    best = None
    for labels in _set_partitions(m):
        blocks = {}
        for idx, b in enumerate(labels):
            blocks.setdefault(b, []).append(idx)
        block_list = list(blocks.values())
        for shift in itertools.product(options, repeat=len(block_list)):
            cost = 0
            for members, d in zip(block_list, shift):
                at = times[members[-1]] + d
                cost += g[len(members)] + sum(at - times[v] for v in members)
            if best is None or cost < best:
                best = cost
    return best
