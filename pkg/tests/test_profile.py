from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omdsc.numerics import FLOAT
from omdsc.profile import TimeRegressionError, WaitingProfile, advance_profile, time_to_threshold


class DenseProfile:
    """Reference profile that updates every entry on every advance."""

    def __init__(self, k):
        self.k = k
        self.s = 0
        self.t = Fraction(0)
        self.W = [Fraction(0)] * k

    def advance(self, to):
        dt = to - self.t
        self.W = [w + dt * ((self.s - i) % self.k) for i, w in enumerate(self.W)]
        self.t = to


def test_advance_rates():
    p = WaitingProfile(3, s=4)
    p.advance(2)
    assert p.values() == [2, 0, 4]
    p.advance(2)
    assert p.values() == [2, 0, 4]
    p.add_requests(1)
    assert [p.rate(i) for i in range(3)] == [2, 1, 0]


def test_advance_profile_returns_copy():
    p = WaitingProfile(3, s=4)
    q = advance_profile(p, 2)
    assert p.values() == [0, 0, 0]
    assert q.values() == [2, 0, 4]
    assert q.last_update == 2


def test_time_regression():
    p = WaitingProfile(3)
    p.advance(5)
    with pytest.raises(TimeRegressionError):
        p.advance(4)


def test_time_to_threshold_examples():
    p = WaitingProfile(4, s=3)
    assert time_to_threshold(p, 0, 2) == Fraction(2, 3)
    p.advance(Fraction(2, 3))
    assert p[0] == 2
    assert time_to_threshold(p, 0, 2) == 0
    q = WaitingProfile(4, s=1)
    q.advance(1)
    assert q[0] == 1 and q.rate(1) == 0
    q.add_requests(0)
    assert time_to_threshold(q, 1, 2) is None


ops = st.lists(st.tuples(st.fractions(min_value=0, max_value=3, max_denominator=7), st.integers(0, 9)),
               max_size=25)


@settings(max_examples=150)
@given(st.integers(1, 12), ops)
def test_lazy_profile_matches_dense_reference(k, steps):
    lazy = WaitingProfile(k)
    dense = DenseProfile(k)
    now = Fraction(0)
    for dt, count in steps:
        now += dt
        lazy.advance(now)
        dense.advance(now)
        lazy.add_requests(count)
        dense.s += count
        assert lazy.values() == dense.W
        assert [lazy[i] for i in range(k)] == dense.W
        snap = lazy.snapshot()
        assert snap.minimum() == min(dense.W)
        for cut in (Fraction(1, 2), 1, Fraction(7, 3)):
            assert snap.below(cut) == [i for i, w in enumerate(dense.W) if w < cut]
            assert snap.above(cut, range(k - 1, -1, -1)) == [i for i in range(k - 1, -1, -1) if dense.W[i] > cut]
        for i in range(k):
            target = dense.W[i] + 1
            dt_hit = time_to_threshold(lazy, i, target)
            rate = (dense.s - i) % k
            assert dt_hit == (None if rate == 0 else Fraction(1, rate))
        assert all(w >= 0 for w in dense.W)


def test_float_profile_tracks_exact():
    exact = WaitingProfile(7)
    approx = WaitingProfile(7, FLOAT)
    t = Fraction(0)
    for step in range(1, 40):
        t += Fraction(step % 5 + 1, 3)
        exact.advance(t)
        approx.advance(float(t))
        exact.add_requests(step % 4)
        approx.add_requests(step % 4)
    for a, b in zip(exact.values(), approx.values()):
        assert abs(float(a) - b) < 1e-9 * max(1.0, float(a))
    assert approx.snapshot().below(float(min(exact.values())) + 1e-12) == []
