"""Scalar backends, residues mod k, cyclic intervals and the alpha solver."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, NamedTuple, Union

Scalar = Union[Fraction, float]

ALPHA_GRID = 2 ** 20
ALPHA_FLOOR = 4
FLOAT_TOL = 1e-9


class Backend:
    """Number factory and comparison rules for one simulation run.

    The exact backend works on :class:`fractions.Fraction` and compares with
    no slack.  The float backend works on binary floats and treats values
    within ``tol`` of a threshold as having reached it.
    """

    def __init__(self, name: str, exact: bool, tol: float = 0.0):
        self.name = name
        self.exact = exact
        self.tol = tol

    def __repr__(self):
        return f"Backend({self.name!r})"

    def num(self, x) -> Scalar:
        if self.exact:
            if isinstance(x, float):
                if not math.isfinite(x):
                    raise ValueError(f"non-finite value {x!r} on exact backend")
                return Fraction(x)
            if isinstance(x, str):
                return Fraction(x.strip())
            return Fraction(x)
        value = float(x)
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {x!r}")
        return value

    @property
    def zero(self) -> Scalar:
        return Fraction(0) if self.exact else 0.0

    def ge(self, a: Scalar, b: Scalar) -> bool:
        return a >= b if self.exact else a >= b - self.tol

    def lt(self, a: Scalar, b: Scalar) -> bool:
        return not self.ge(a, b)

    def le(self, a: Scalar, b: Scalar) -> bool:
        return a <= b if self.exact else a <= b + self.tol

    def eq(self, a: Scalar, b: Scalar) -> bool:
        return a == b if self.exact else abs(a - b) <= self.tol * max(1.0, abs(a), abs(b))


EXACT = Backend("exact", exact=True)
FLOAT = Backend("float", exact=False, tol=FLOAT_TOL)


def get_backend(name) -> Backend:
    if isinstance(name, Backend):
        return name
    try:
        return {"exact": EXACT, "float": FLOAT}[name]
    except KeyError:
        raise ValueError(f"unknown backend {name!r} (expected 'exact' or 'float')") from None


def parse_scalar(text, backend: Backend = EXACT) -> Scalar:
    """Parse ``"p/q"``, an integer, or a decimal string into ``backend``'s type."""
    if isinstance(text, (int, Fraction, float)):
        return backend.num(text)
    text = str(text).strip()
    if backend.exact:
        return Fraction(text)
    if "/" in text:
        return float(Fraction(text))
    return backend.num(text)


def format_scalar(x: Scalar) -> str:
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, int):
        return f"{x}/1"
    if math.isinf(x):
        return "inf"
    return repr(float(x))


class Residue(NamedTuple):
    value: int
    modulus: int


def residue(x: int, k: int) -> int:
    """Nonnegative remainder of ``x`` modulo ``k``."""
    if k < 1:
        raise ValueError(f"invalid modulus {k}")
    return x % k


@dataclass(frozen=True)
class CyclicInterval:
    """The wrap-around set {lo, lo+1, ..., hi} inside Z_k."""

    lo: int
    hi: int
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"invalid modulus {self.k}")
        object.__setattr__(self, "lo", self.lo % self.k)
        object.__setattr__(self, "hi", self.hi % self.k)

    @property
    def size(self) -> int:
        return (self.hi - self.lo) % self.k + 1

    def __len__(self):
        return self.size

    def __contains__(self, x) -> bool:
        return interval_contains(self, x)

    def __iter__(self) -> Iterator[int]:
        for d in range(self.size):
            yield (self.lo + d) % self.k

    def offset(self, x: int) -> int:
        """Position of ``x`` counted forward from ``lo``."""
        return (x - self.lo) % self.k


def interval_size(interval: CyclicInterval) -> int:
    return interval.size


def interval_contains(interval: CyclicInterval, x) -> bool:
    if isinstance(x, Residue):
        if x.modulus != interval.k:
            raise ValueError(f"modulus mismatch: {x.modulus} vs {interval.k}")
        x = x.value
    return (x - interval.lo) % interval.k <= (interval.hi - interval.lo) % interval.k


@dataclass(frozen=True)
class AlphaParam:
    k: int
    alpha_exact: float
    alpha_used: Fraction

    def value(self, backend: Backend) -> Scalar:
        return backend.num(self.alpha_used)


def _alpha_bisect(k: int) -> float:
    target = math.log(k)
    lo, hi = 1.0, max(2.0, target) + 1.0
    while hi - lo > 1e-12:
        mid = (lo + hi) / 2
        if mid * math.log(mid) < target:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def solve_alpha(k: int) -> AlphaParam:
    """Solve alpha**alpha == k and pick the rational alpha the algorithms use.

    ``alpha_used`` is the smallest multiple of 2**-20 that is at least 4 and
    at least ``alpha_exact`` (both up to the float tolerance).
    """
    if k < 2:
        raise ValueError(f"alpha is defined for k >= 2, got {k}")
    exact = _alpha_bisect(k)
    log_k = math.log(k)
    m = max(ALPHA_FLOOR * ALPHA_GRID, math.floor(exact * ALPHA_GRID))
    while True:
        c = m / ALPHA_GRID
        if c * math.log(c) >= log_k - FLOAT_TOL and c >= exact - FLOAT_TOL:
            break
        m += 1
    return AlphaParam(k=k, alpha_exact=exact, alpha_used=Fraction(m, ALPHA_GRID))


def competitive_ratio(alg_cost: Scalar, opt_cost: Scalar):
    """ALG/OPT with 0/0 read as 1 and positive/0 as ``math.inf``."""
    if alg_cost < 0 or opt_cost < 0:
        raise ValueError("costs must be nonnegative")
    if opt_cost == 0:
        return 1 if alg_cost == 0 else math.inf
    return alg_cost / opt_cost


def log_ratio_unit(k: int) -> float:
    """log k / log log k, the growth scale of the recurring algorithm."""
    return math.log(k) / math.log(math.log(k))
