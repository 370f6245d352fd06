"""The waiting profile W_0..W_{k-1} shared by the recurring algorithm and the
lower-bound adversary.

W_i grows at rate (s - i) mod k, where s is the number of requests seen so
far.  Instead of touching all k entries on every advance, the profile keeps
the total time spent with each residue of s (``occupancy[c]``) and reads

    W_i = sum_c occupancy[c] * ((c - i) mod k)
        = M - i*T + k * sum_{c < i} occupancy[c]

with T the elapsed time and M = sum_c c * occupancy[c].  A Fenwick tree
serves the prefix sum, so advancing and reading one W_i are O(log k).
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Optional

from .numerics import EXACT, Backend, Scalar


class TimeRegressionError(ValueError):
    pass


class _Fenwick:
    __slots__ = ("n", "tree")

    def __init__(self, n: int, zero):
        self.n = n
        self.tree = [zero] * (n + 1)

    def add(self, i: int, delta):
        i += 1
        while i <= self.n:
            self.tree[i] += delta
            i += i & -i

    def prefix(self, i: int):
        """Sum of entries 0..i-1."""
        total = self.tree[0]
        while i > 0:
            total += self.tree[i]
            i -= i & -i
        return total

    def copy(self) -> "_Fenwick":
        other = _Fenwick.__new__(_Fenwick)
        other.n = self.n
        other.tree = list(self.tree)
        return other


def _unwind(vals: list):
    # Fenwick node values -> point values, in place, O(n)
    n = len(vals)
    for i in range(n, 0, -1):
        j = i + (i & -i)
        if j <= n:
            vals[j - 1] -= vals[i - 1]


class ProfileSnapshot:
    """W_0..W_{k-1} at one instant, stored as numerators over a shared scale
    so bulk threshold tests avoid per-entry rational arithmetic."""

    __slots__ = ("nums", "scale", "backend")

    def __init__(self, nums: list, scale: int, backend: Backend):
        self.nums = nums
        self.scale = scale
        self.backend = backend

    def __len__(self):
        return len(self.nums)

    def __getitem__(self, i: int) -> Scalar:
        if self.backend.exact:
            return Fraction(self.nums[i], self.scale)
        return self.nums[i]

    def values(self) -> list:
        return [self[i] for i in range(len(self.nums))]

    def _split(self, threshold):
        t = Fraction(threshold)
        return t.numerator * self.scale, t.denominator

    def below(self, threshold, indices: Optional[Iterable[int]] = None) -> list:
        """Indices (in the given order) whose entry is strictly below ``threshold``."""
        idx = range(len(self.nums)) if indices is None else indices
        nums = self.nums
        if self.backend.exact:
            top, den = self._split(threshold)
            return [i for i in idx if nums[i] * den < top]
        cut = threshold - self.backend.tol
        return [i for i in idx if nums[i] < cut]

    def above(self, threshold, indices: Optional[Iterable[int]] = None) -> list:
        """Indices whose entry is strictly above ``threshold``."""
        idx = range(len(self.nums)) if indices is None else indices
        nums = self.nums
        if self.backend.exact:
            top, den = self._split(threshold)
            return [i for i in idx if nums[i] * den > top]
        cut = threshold + self.backend.tol
        return [i for i in idx if nums[i] > cut]

    def minimum(self) -> Scalar:
        low = min(self.nums)
        return Fraction(low, self.scale) if self.backend.exact else low


class WaitingProfile:
    def __init__(self, k: int, backend: Backend = EXACT, start: Scalar = None, s: int = 0):
        if k < 1:
            raise ValueError("k must be positive")
        self.k = k
        self.backend = backend
        zero = backend.zero
        self.s = s
        self.last_update = zero if start is None else backend.num(start)
        self._occ = _Fenwick(k, zero)
        self._elapsed = zero
        self._moment = zero

    def copy(self) -> "WaitingProfile":
        other = WaitingProfile.__new__(WaitingProfile)
        other.__dict__.update(self.__dict__)
        other._occ = self._occ.copy()
        return other

    @property
    def s_bar(self) -> int:
        return self.s % self.k

    def rate(self, i: int) -> int:
        return (self.s - i) % self.k

    def advance(self, to: Scalar):
        dt = to - self.last_update
        if dt < 0:
            raise TimeRegressionError(f"cannot move profile back from {self.last_update} to {to}")
        if dt:
            c = self.s % self.k
            self._occ.add(c, dt)
            self._elapsed += dt
            self._moment += c * dt
        self.last_update = to

    def add_requests(self, count: int):
        self.s += count

    def __getitem__(self, i: int) -> Scalar:
        i %= self.k
        return self._moment - i * self._elapsed + self.k * self._occ.prefix(i)

    def values(self) -> list:
        """All k entries in O(k)."""
        return self.snapshot().values()

    def snapshot(self) -> "ProfileSnapshot":
        """Frozen copy of all k entries, cheap to scan and compare."""
        k = self.k
        tree = self._occ.tree[1:]
        if self.backend.exact:
            scale = math.lcm(self._elapsed.denominator, self._moment.denominator,
                             *(x.denominator for x in tree))
            occ = [x.numerator * (scale // x.denominator) for x in tree]
            elapsed = self._elapsed.numerator * (scale // self._elapsed.denominator)
            w = self._moment.numerator * (scale // self._moment.denominator)
        else:
            scale = 1
            occ = list(tree)
            elapsed, w = self._elapsed, self._moment
        _unwind(occ)
        nums = []
        for i in range(k):
            nums.append(w)
            w += k * occ[i] - elapsed
        return ProfileSnapshot(nums, scale, self.backend)

    def time_to_threshold(self, i: int, target: Scalar) -> Optional[Scalar]:
        """Time from ``last_update`` until W_i reaches ``target``; None if never."""
        return time_to_threshold(self, i, target)


def advance_profile(profile: WaitingProfile, to: Scalar) -> WaitingProfile:
    """Copy of ``profile`` advanced to time ``to`` at the current rates."""
    out = profile.copy()
    out.advance(to)
    return out


def time_to_threshold(profile: WaitingProfile, i: int, target: Scalar) -> Optional[Scalar]:
    current = profile[i]
    if profile.backend.ge(current, target):
        return profile.backend.zero
    rate = profile.rate(i)
    if rate == 0:
        return None
    return (target - current) / rate
