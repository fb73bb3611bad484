"""Exact nonnegative rationals and certified intervals.

Every distance, threshold and weight in the package is a ``Fraction``; an
``Interval`` brackets a quantity that the finite encoding of a point does not
pin down (the tail of a truncated sequence).  ``compare`` answers a threshold
question three ways so that callers can treat the undecided case
conservatively.
"""

from __future__ import annotations

import decimal
import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

ExactScalar = Fraction
Number = Union[int, Fraction, str]

POW_EXPONENT_CAP = 4096
DEFAULT_ROOT_WIDTH = Fraction(1, 2**40)


class ExponentCapExceeded(ValueError):
    pass


def scalar(x: Number) -> Fraction:
    """Coerce ``x`` to a nonnegative ``Fraction``.

    Strings are parsed as ``"p/q"``; floats are refused because a float
    threshold is exactly what this module exists to avoid.
    """
    if isinstance(x, float):
        raise TypeError(f"refusing float {x!r}; pass a Fraction or a 'p/q' string")
    v = Fraction(x)
    if v < 0:
        raise ValueError(f"negative scalar {v}")
    return v


@dataclass(frozen=True)
class Interval:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        lo, hi = Fraction(self.lo), Fraction(self.hi)
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def exact(cls, x: Number) -> "Interval":
        v = Fraction(x)
        return cls(v, v)

    @property
    def is_exact(self) -> bool:
        return self.lo == self.hi

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi

    def __add__(self, other: "Interval") -> "Interval":
        return iv_add(self, other)

    def scale(self, c: Number) -> "Interval":
        c = Fraction(c)
        if c < 0:
            return Interval(self.hi * c, self.lo * c)
        return Interval(self.lo * c, self.hi * c)

    def __str__(self) -> str:
        if self.is_exact:
            return f"[{self.lo}]"
        return f"[{self.lo}, {self.hi}]"


ZERO = Interval(Fraction(0), Fraction(0))


class Tri(enum.Enum):
    BELOW = "below"
    ABOVE = "above"
    UNKNOWN = "unknown"


def iv_add(a: Interval, b: Interval) -> Interval:
    return Interval(a.lo + b.lo, a.hi + b.hi)


def iv_max(a: Interval, b: Interval) -> Interval:
    return Interval(max(a.lo, b.lo), max(a.hi, b.hi))


def iv_hull(a: Interval, b: Interval) -> Interval:
    return Interval(min(a.lo, b.lo), max(a.hi, b.hi))


def compare(a: Interval, t: Fraction, strict: bool = True) -> Tri:
    """Classify ``a`` against threshold ``t``.

    With ``strict`` the question is ``value > t``: BELOW means every value in
    ``a`` is ``<= t``.  Without it the question is ``value >= t`` and BELOW
    means every value is ``< t``.
    """
    t = Fraction(t)
    if strict:
        if a.hi <= t:
            return Tri.BELOW
        if a.lo > t:
            return Tri.ABOVE
    else:
        if a.hi < t:
            return Tri.BELOW
        if a.lo >= t:
            return Tri.ABOVE
    return Tri.UNKNOWN


def pow_scalar(b: Fraction, k: int, cap: int = POW_EXPONENT_CAP) -> Fraction:
    if k < 0:
        raise ValueError("negative exponent")
    if k > cap:
        raise ExponentCapExceeded(f"exponent {k} exceeds cap {cap}")
    b = Fraction(b)
    if b > 1:
        raise ValueError(f"base {b} > 1")
    return b**k


def iroot(n: int, q: int) -> int:
    """Largest integer r with r**q <= n."""
    if n < 0:
        raise ValueError("negative radicand")
    if n < 2 or q == 1:
        return n
    r = 1 << ((n.bit_length() + q - 1) // q)
    while True:
        s = ((q - 1) * r + n // r ** (q - 1)) // q
        if s >= r:
            break
        r = s
    while r**q > n:
        r -= 1
    while (r + 1) ** q <= n:
        r += 1
    return r


def rational_power(x: Number, w: Number, rel_width: Fraction = DEFAULT_ROOT_WIDTH) -> Interval:
    """Certified enclosure of ``x**w`` for rational ``x >= 0`` and ``w >= 0``.

    ``w = p/q`` is evaluated as the q-th root of ``x**p`` by integer root
    bracketing; the returned interval has relative width at most
    ``rel_width`` (it is degenerate whenever the root is exact).
    """
    x, w = scalar(x), scalar(w)
    if w == 0:
        return Interval.exact(1)
    if x == 0:
        return Interval.exact(0)
    p, q = w.numerator, w.denominator
    y = x**p
    if q == 1:
        return Interval.exact(y)
    a, c = y.numerator, y.denominator
    # y**(1/q) = (a * c**(q-1))**(1/q) / c
    radicand = a * c ** (q - 1)
    r0 = iroot(radicand, q)
    if r0**q == radicand:
        return Interval.exact(Fraction(r0, c))
    k = max(0, (rel_width.denominator.bit_length() - r0.bit_length()) + 2)
    while True:
        scale = 1 << k
        r = iroot(radicand * scale**q, q)
        if r > 0 and Fraction(1, r) <= rel_width:
            return Interval(Fraction(r, c * scale), Fraction(r + 1, c * scale))
        k += 8


# relative error allowed for math.log on ints and for a difference of two logs
_LOG_REL = Fraction(1, 2**48)


def _log_int(v: int) -> Fraction:
    return Fraction(math.log(v))


def log_bracket(lo: int, hi: int | None) -> Interval:
    """Outward-rounded natural-log enclosure of a count bracket ``[lo, hi]``.

    ``hi=None`` stands for an unbounded count and is rejected: rates need a
    finite ceiling.
    """
    if hi is None:
        raise ValueError("unbounded count has no finite log")
    if lo < 1:
        raise ValueError("counts below 1 have no log")
    return log_fraction_bracket(Interval(Fraction(lo), Fraction(hi)))


def log_fraction_bracket(x: Interval) -> Interval:
    """Outward-rounded log of a rational interval with ``x.lo >= 1``.

    ``log(p/q)`` is computed as ``log p - log q``; the slack scales with the
    two terms so cancellation near 1 cannot hide rounding error.
    """
    if x.lo < 1:
        raise ValueError("log bracket needs values >= 1")

    def enclose(v: Fraction) -> tuple[Fraction, Fraction]:
        if v == 1:
            return Fraction(0), Fraction(0)
        a, b = _log_int(v.numerator), _log_int(v.denominator)
        slack = (abs(a) + abs(b) + 1) * _LOG_REL
        return max(Fraction(0), a - b - slack), a - b + slack

    return Interval(enclose(x.lo)[0], enclose(x.hi)[1])


FMT_MAX_DEN = 10**6
FMT_DIGITS = 12


def fmt(x: Fraction | None, direction: int = 0) -> str:
    """Canonical text form used in result tables.

    Small-denominator rationals print as ``p/q``; others print as a
    12-digit decimal rounded down (``direction < 0``), up (``> 0``) or to
    nearest (``0``), so printed brackets still enclose the true value.
    """
    if x is None:
        return "inf" if direction >= 0 else "-inf"
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    if x.denominator <= FMT_MAX_DEN:
        return f"{x.numerator}/{x.denominator}"
    mode = decimal.ROUND_FLOOR if direction < 0 else decimal.ROUND_CEILING if direction > 0 else decimal.ROUND_HALF_EVEN
    ctx = decimal.Context(prec=FMT_DIGITS, rounding=mode)
    q = ctx.divide(decimal.Decimal(x.numerator), decimal.Decimal(x.denominator))
    return format(q, "E") if abs(q.adjusted()) > 15 else format(q, "f")
