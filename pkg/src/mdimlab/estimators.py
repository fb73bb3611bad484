"""Growth rates of counts and the scale slopes built from them."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

from .counting import (
    CountBracket,
    CylinderCover,
    closed_form_count,
    min_spanning,
    product_partition,
    relative_count,
)
from .exactnum import Interval, log_bracket
from .metrics import evaluator_for, ultra_depth
from .symbolic import Product, build_grid


class InsufficientScales(ValueError):
    pass


@dataclass(frozen=True)
class RateCurve:
    """``log`` of a count bracket at increasing horizons ``n``."""

    points: tuple  # ((n, Interval), ...)

    def __post_init__(self):
        ns = [n for n, _ in self.points]
        if not ns or any(b <= a for a, b in zip(ns, ns[1:])) or ns[0] < 1:
            raise ValueError("horizons must be positive and strictly increasing")

    @classmethod
    def from_counts(cls, ns: Sequence[int], counts: Sequence[CountBracket | int]) -> "RateCurve":
        pts = []
        for n, c in zip(ns, counts):
            if isinstance(c, int):
                pts.append((n, log_bracket(c, c)))
            else:
                pts.append((n, log_bracket(c.lo, c.hi)))
        return cls(tuple(pts))


def growth_rate(curve: RateCurve) -> Interval:
    """Bracket of ``lim a_n / n`` for a subadditive log-count sequence.

    The ceiling is ``min_n a_n / n``; the floor is the secant slope between
    the two largest horizons (clipped into ``[0, ceiling]``).
    """
    pts = curve.points
    hi = min(a.hi / n for n, a in pts)
    if len(pts) == 1:
        return Interval(Fraction(0), hi)
    (n1, a1), (n2, a2) = pts[-2], pts[-1]
    lo = (a2.lo - a1.hi) / (n2 - n1)
    lo = min(max(lo, Fraction(0)), hi)
    return Interval(lo, hi)


@dataclass(frozen=True)
class EpsEntropy:
    eps: Fraction
    h: Interval
    method: str = ""


@dataclass(frozen=True)
class MdimEstimate:
    slope: float
    secant: Interval
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def half_width(self) -> Fraction:
        return self.secant.width / 2


def _log_inv(eps: Fraction) -> Fraction:
    """``log(1/eps)`` as an exact rational of a double."""
    import math

    return Fraction(math.log(eps.denominator) - math.log(eps.numerator))


def mdim_slope(points: Sequence[EpsEntropy]) -> MdimEstimate:
    """Least-squares slope of ``h(eps)`` against ``log(1/eps)`` plus the
    cross-secant bracket between the two finest scales."""
    pts = sorted(points, key=lambda e: -e.eps)
    if len(pts) < 2:
        raise InsufficientScales("a slope needs at least two scales")
    xs = [_log_inv(e.eps) for e in pts]
    ys = [e.h.mid for e in pts]
    k = len(xs)
    mx, my = sum(xs) / k, sum(ys) / k
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    slope = sxy / sxx
    icpt = my - slope * mx
    resid = [float(y - (icpt + slope * x)) for x, y in zip(xs, ys)]
    h1, h2 = pts[-2].h, pts[-1].h
    dx = xs[-1] - xs[-2]
    sec = Interval((h2.lo - h1.hi) / dx, (h2.hi - h1.lo) / dx)
    return MdimEstimate(
        float(slope),
        sec,
        {"intercept": float(icpt), "residuals": resid, "scales": [str(e.eps) for e in pts]},
    )


def eps_entropy_weighted(a: tuple, dom: Interval, cod: Interval, eps) -> EpsEntropy:
    """``a1 * h_X(eps) + a2 * h_Y(eps)`` from two rate brackets."""
    a1, a2 = Fraction(a[0]), Fraction(a[1])
    h = Interval(a1 * dom.lo + a2 * cod.lo, a1 * dom.hi + a2 * cod.hi)
    return EpsEntropy(Fraction(eps), h, "weighted")


def box_dimension(system, eps_grid: Sequence, *, cap: int | None = None, check: bool = True):
    """Box dimension from ``log N_eps`` against ``log(1/eps)``, where
    ``N_eps`` is the minimal number of ``eps``-balls (horizon 1).

    Returns the estimate and a table of ``(eps, count, closed_form)``.
    """
    ev = evaluator_for(system)
    rows, ents = [], []
    for eps in eps_grid:
        eps = Fraction(eps)
        cf = closed_form_count(ev, 1, eps)
        cnt = None
        if check or cf is None:
            grid = build_grid(system, 1, eps, cap=cap)
            cnt = min_spanning(grid, ev, 1, eps)
        use = cnt if cnt is not None else cf
        rows.append((eps, cnt, cf))
        ents.append(EpsEntropy(eps, log_bracket(use.lo, use.hi), use.method))
    return mdim_slope(ents), rows


def canonical_partition(system, eps) -> CylinderCover:
    """The cylinder partition of diameter ``<= eps`` with the least depth."""
    eps = Fraction(eps)
    if isinstance(system, Product):
        a = ultra_depth(system.left.metric.b, eps, False)
        b = ultra_depth(system.right.metric.b, eps, False)
        return product_partition(system, a, b)
    return product_partition(system, ultra_depth(system.metric.b, eps, False))


def relative_mdim(factor, V: CylinderCover | None, eps_grid: Sequence, nmax: int):
    """Scale slope of ``h(T, U_eps | V v pi)`` for the canonical partitions
    ``U_eps``; for ultrametric systems these attain the infimum over covers
    of diameter ``<= eps``."""
    ents, rows = [], []
    for eps in eps_grid:
        eps = Fraction(eps)
        U = canonical_partition(factor.domain, eps)
        ns = list(range(1, nmax + 1))
        counts = [relative_count(U, V, factor, n) for n in ns]
        rate = growth_rate(RateCurve.from_counts(ns, counts))
        rows.append((eps, counts, rate))
        ents.append(EpsEntropy(eps, rate, "canonicalCover"))
    return mdim_slope(ents), rows


def closed_form_rate(ev, n_ladder: Sequence[int], eps, strict: bool = False) -> Interval:
    """Growth-rate bracket of closed-form class counts along ``n_ladder``."""
    counts = []
    for n in n_ladder:
        c = closed_form_count(ev, n, eps, strict)
        if c is None:
            raise ValueError("no closed form for this evaluator")
        counts.append(c)
    return growth_rate(RateCurve.from_counts(n_ladder, counts))


def closed_form_slope(ev, eps_grid: Sequence, n_ladder: Sequence[int], strict: bool = False):
    ents = [EpsEntropy(Fraction(e), closed_form_rate(ev, n_ladder, e, strict), "closedForm") for e in eps_grid]
    return mdim_slope(ents), ents
