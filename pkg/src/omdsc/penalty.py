"""Penalty functions, zero-penalty sets, case classification and scaling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .numerics import EXACT, Backend, Scalar, format_scalar, parse_scalar

CONSTANT = "constant"
CEIL_DIV = "ceil_div"
LINEAR = "linear"


class PenaltyModeError(ValueError):
    """Raised when an operation needs a binary penalty and got another kind."""


class NotScalableError(ValueError):
    pass


@dataclass(frozen=True)
class PenaltyFunction:
    """Size cost f(n) as a finite table f(1..N) plus a rule for n > N.

    ``tail`` is one of ``"constant"`` (f(n) = ``tail_value``, 1 by default),
    ``"ceil_div"`` (f(n) = ceil(n / tail_k)) or ``"linear"`` (f(n) = n).
    """

    table: tuple
    tail: str = CONSTANT
    tail_k: Optional[int] = None
    tail_value: Fraction = Fraction(1)
    _memo: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        table = tuple(Fraction(v) for v in self.table)
        if not table:
            raise ValueError("penalty table needs at least f(1)")
        if any(v < 0 for v in table):
            raise ValueError("penalty values must be nonnegative")
        if self.tail not in (CONSTANT, CEIL_DIV, LINEAR):
            raise ValueError(f"unknown tail rule {self.tail!r}")
        if self.tail == CEIL_DIV and (self.tail_k is None or self.tail_k < 1):
            raise ValueError("ceil_div tail needs a positive k")
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "tail_value", Fraction(self.tail_value))

    # constructors -------------------------------------------------------

    @classmethod
    def constant_one(cls) -> "PenaltyFunction":
        return cls(table=(1,))

    @classmethod
    def from_zeros(cls, zeros: Sequence[int], size: Optional[int] = None) -> "PenaltyFunction":
        zeros = sorted(set(int(z) for z in zeros))
        if zeros and zeros[0] < 1:
            raise ValueError("zeros must be positive sizes")
        n = max([size or 1] + zeros)
        zs = set(zeros)
        return cls(table=tuple(0 if i in zs else 1 for i in range(1, n + 1)))

    @classmethod
    def multiples_of(cls, k: int, size: Optional[int] = None) -> "PenaltyFunction":
        n = max(k, size or k)
        return cls.from_zeros(range(k, n + 1, k), n)

    @classmethod
    def ceil_div(cls, k: int) -> "PenaltyFunction":
        return cls(table=tuple(math.ceil(n / k) for n in range(1, k + 1)), tail=CEIL_DIV, tail_k=k)

    @classmethod
    def linear(cls) -> "PenaltyFunction":
        return cls(table=(1,), tail=LINEAR)

    # evaluation ---------------------------------------------------------

    @property
    def size(self) -> int:
        return len(self.table)

    @property
    def mode(self) -> str:
        if self.tail == CONSTANT and self.tail_value == 1 and all(v in (0, 1) for v in self.table):
            return "binary"
        return "general"

    @property
    def zeros(self) -> list:
        return [n for n, v in enumerate(self.table, start=1) if v == 0]

    def __call__(self, n: int) -> Fraction:
        if n < 1:
            raise ValueError(f"penalty is defined on positive sizes, got {n}")
        if n <= len(self.table):
            return self.table[n - 1]
        if self.tail == CEIL_DIV:
            return Fraction(-(-n // self.tail_k))
        if self.tail == LINEAR:
            return Fraction(n)
        return self.tail_value

    def value(self, n: int, backend: Backend = EXACT) -> Scalar:
        return backend.num(self(n))

    def nonzero_values(self) -> set:
        vals = {v for v in self.table if v != 0}
        if self.tail == CONSTANT:
            vals.add(self.tail_value)
        else:
            vals.add(None)  # unbounded tails are never two-valued
        return vals

    # serialization ------------------------------------------------------

    def to_json(self) -> dict:
        if self.tail == CEIL_DIV:
            tail = {"ceil_div": self.tail_k}
        elif self.tail == LINEAR:
            tail = "linear"
        elif self.tail_value == 1:
            tail = "constant_one"
        else:
            tail = {"constant": format_scalar(self.tail_value)}
        table = [int(v) if v.denominator == 1 else format_scalar(v) for v in self.table]
        return {"table": table, "tail": tail}

    @classmethod
    def from_json(cls, data: dict) -> "PenaltyFunction":
        table = [parse_scalar(v) for v in data["table"]]
        tail = data.get("tail", "constant_one")
        if tail == "constant_one":
            return cls(table=table)
        if tail == "linear":
            return cls(table=table, tail=LINEAR)
        if isinstance(tail, dict) and "ceil_div" in tail:
            return cls(table=table, tail=CEIL_DIV, tail_k=int(tail["ceil_div"]))
        if isinstance(tail, dict) and "constant" in tail:
            return cls(table=table, tail_value=parse_scalar(tail["constant"]))
        raise ValueError(f"unrecognised tail rule {tail!r}")


def _require_binary(f: PenaltyFunction):
    if f.mode != "binary":
        raise PenaltyModeError("operation requires a binary penalty with a constant_one tail")


def zero_penalty_set(f: PenaltyFunction, limit: int) -> list:
    """reach[n] for n in 0..limit; reach[n] is True iff n is a sum of zeros of f.

    Index 0 is the empty sum and is always True; B_f itself is ``reach[1:]``.
    """
    _require_binary(f)
    if limit < 1:
        raise ValueError("limit must be positive")
    zeros = f.zeros
    reach = [False] * (limit + 1)
    reach[0] = True
    for n in range(1, limit + 1):
        reach[n] = any(z <= n and reach[n - z] for z in zeros)
    return reach


@dataclass(frozen=True)
class PenaltyClass:
    variant: str  # "I" | "II" | "III"
    zeros: tuple
    k: Optional[int] = None

    @property
    def label(self) -> str:
        if self.variant == "I":
            return "Case (i)"
        if self.variant == "II":
            return f"Case (ii), k={self.k}"
        return "Case (iii)"

    @property
    def regime(self) -> str:
        if self.variant == "I":
            return "2-competitive (Dooly et al.)"
        if self.variant == "II":
            if self.k == 1:
                return "1-competitive"
            if self.k == 2:
                return "3-competitive (Emek et al.)"
            return "Θ(log k / log log k)"
        return "unbounded"


def classify(f: PenaltyFunction) -> PenaltyClass:
    """Split a binary penalty into case (i), (ii) with its k, or (iii).

    Decided on the zeros of the table; under the constant-one tail there are
    no zeros beyond the table, so this is exact.
    """
    _require_binary(f)
    zeros = tuple(f.zeros)
    if not zeros:
        return PenaltyClass("I", zeros)
    k = zeros[0]
    if all(z % k == 0 for z in zeros):
        return PenaltyClass("II", zeros, k)
    return PenaltyClass("III", zeros)


def case_iii_parameters(f: PenaltyFunction) -> tuple:
    """(k*, l): the least element of B_f and the least one not a multiple of it."""
    cls = classify(f)
    if cls.variant != "III":
        raise PenaltyModeError(f"expected a case (iii) penalty, got {cls.label}")
    zmax = max(cls.zeros)
    reach = zero_penalty_set(f, 4 * zmax * zmax)
    k_star = next(n for n in range(1, len(reach)) if reach[n])
    ell = next(n for n in range(1, len(reach)) if reach[n] and n % k_star)
    return k_star, ell


def _partition_dp(f: PenaltyFunction, limit: int) -> list:
    g = [Fraction(0)] * (limit + 1)
    for n in range(1, limit + 1):
        best = f(n)
        for j in range(1, n // 2 + 1):
            cand = g[j] + g[n - j]
            if cand < best:
                best = cand
        g[n] = best
    return g


def effective_penalty_table(f: PenaltyFunction, limit: int) -> list:
    """g[0..limit] where g[n] is the cheapest split of n requests into groups.

    Binary penalties use the zero-penalty set; ceil_div and linear families
    are already subadditive, so g = f beyond the table as long as the table
    itself is; anything else falls back to the quadratic partition DP.
    """
    memo = f._memo
    cached = memo.get("g")
    if cached is not None and len(cached) > limit:
        return cached
    if f.mode == "binary":
        reach = zero_penalty_set(f, max(limit, 1))
        g = [Fraction(0)] + [Fraction(0) if reach[n] else Fraction(1) for n in range(1, limit + 1)]
    elif f.tail in (CEIL_DIV, LINEAR) and _table_matches_family(f):
        g = [Fraction(0)] + [f(n) for n in range(1, limit + 1)]
    else:
        g = _partition_dp(f, limit)
    memo["g"] = g
    return g


def _table_matches_family(f: PenaltyFunction) -> bool:
    if f.tail == CEIL_DIV:
        return all(v == -(-n // f.tail_k) for n, v in enumerate(f.table, start=1))
    return all(v == n for n, v in enumerate(f.table, start=1))


def effective_penalty(f: PenaltyFunction, n: int) -> Fraction:
    if n < 1:
        raise ValueError("size must be positive")
    return effective_penalty_table(f, n)[n]


def scale_normalize(instance, mu):
    """Rescale a {0, mu}-valued penalty to {0, 1} and divide all times by ``mu``.

    Returns ``(scaled_instance, mu)``.  Any schedule costs exactly mu times
    as much on the original instance as on the scaled one.
    """
    from .engine import ArrivalEvent, Instance

    f = instance.penalty
    if mu <= 0:
        raise ValueError("mu must be positive")
    values = f.nonzero_values()
    if values - {mu}:
        shown = sorted(str(v) for v in values)
        raise NotScalableError(f"nonzero penalty values {shown} are not all equal to {mu}")
    scaled = PenaltyFunction(table=tuple(0 if v == 0 else 1 for v in f.table))
    arrivals = [ArrivalEvent(ev.time / mu, ev.count, ev.seq) for ev in instance.arrivals]
    return Instance(arrivals, scaled, instance.finalized), mu
