from __future__ import annotations

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdimlab.counting import CountBracket
from mdimlab.estimators import (
    EpsEntropy,
    InsufficientScales,
    RateCurve,
    box_dimension,
    canonical_partition,
    closed_form_rate,
    closed_form_slope,
    growth_rate,
    mdim_slope,
    relative_mdim,
)
from mdimlab.exactnum import Interval
from mdimlab.metrics import UltraShift, evaluator_for
from mdimlab.symbolic import Alphabet, IdentityRemetrized, OneSidedShift, Product, ProjectLeft


def shift(b=Fraction(1, 4), m=2):
    return OneSidedShift(Alphabet(m), UltraShift(Fraction(b)))


def ladder(b, ks):
    return [Fraction(9, 10) * Fraction(b) ** k for k in ks]


def test_rate_curve_requires_increasing_horizons():
    with pytest.raises(ValueError):
        RateCurve(((2, Interval.exact(0)), (1, Interval.exact(0))))
    with pytest.raises(ValueError):
        RateCurve(())


@given(st.integers(min_value=0, max_value=6), st.integers(min_value=1, max_value=5))
def test_growth_rate_of_exact_exponentials(c, k):
    # counts 2^(c + k n) grow at rate k log 2
    ns = [4, 8, 16]
    curve = RateCurve.from_counts(ns, [2 ** (c + k * n) for n in ns])
    r = growth_rate(curve)
    assert r.lo <= Fraction(k * math.log(2)) * (1 + Fraction(1, 10**9))
    assert r.lo >= Fraction(k * math.log(2)) * (1 - Fraction(1, 10**9))
    assert r.hi >= r.lo


def test_growth_rate_accepts_brackets_and_single_points():
    curve = RateCurve.from_counts([1, 2], [CountBracket(2, 4, "greedyBound"), CountBracket(8, 8, "exact")])
    r = growth_rate(curve)
    assert 0 <= r.lo <= r.hi
    single = growth_rate(RateCurve.from_counts([3], [8]))
    assert single.lo == 0 and single.hi >= Fraction(math.log(2)) * Fraction(999, 1000)


@settings(max_examples=50)
@given(st.fractions(min_value=-3, max_value=3, max_denominator=20), st.fractions(min_value=0, max_value=5, max_denominator=10))
def test_mdim_slope_recovers_linear_data(slope, icpt):
    eps = ladder(Fraction(1, 2), range(1, 6))
    pts = [EpsEntropy(e, Interval.exact(icpt + slope * Fraction(math.log(1 / float(e))))) for e in eps]
    est = mdim_slope(pts)
    assert abs(est.slope - float(slope)) < 1e-9
    assert est.secant.lo - Fraction(1, 10**9) <= slope <= est.secant.hi + Fraction(1, 10**9)


def test_mdim_slope_needs_two_scales():
    with pytest.raises(InsufficientScales):
        mdim_slope([EpsEntropy(Fraction(1, 2), Interval.exact(1))])


def test_box_dimension_of_full_shift():
    est, rows = box_dimension(shift(), ladder(Fraction(1, 4), range(2, 6)))
    assert abs(est.slope - 0.5) < 0.02
    for eps, cnt, cf in rows:
        assert cnt.lo == cnt.hi == cf.lo


@pytest.mark.parametrize("b, m, dim", [(Fraction(1, 2), 2, 1.0), (Fraction(1, 3), 3, 1.0), (Fraction(1, 8), 2, 1 / 3)])
def test_closed_form_rates_and_box_dimension(b, m, dim):
    ev = evaluator_for(shift(b, m))
    eps = ladder(b, range(3, 9))
    est, ents = closed_form_slope(ev, eps, [64, 128])
    # the entropy is log m at every scale, so the scale slope brackets 0
    for e in ents:
        assert e.h.lo == pytest.approx(math.log(m), rel=1e-9)
    assert est.secant.lo <= 0 <= est.secant.hi
    assert closed_form_rate(ev, [64, 128], eps[0]).lo == pytest.approx(math.log(m), rel=1e-9)
    assert box_dimension(shift(b, m), ladder(b, range(3, 8)), check=False)[0].slope == pytest.approx(dim, rel=1e-9)


def test_canonical_partition_depth():
    U = canonical_partition(shift(), Fraction(1, 16))
    assert len(U.elements) == 4 and U.diam.hi <= Fraction(1, 16)
    P = Product(shift(), shift(Fraction(1, 2)))
    V = canonical_partition(P, Fraction(1, 4))
    assert len(V.elements) == 2 * 4


def test_relative_mdim_vanishes_for_identity_factor():
    g = IdentityRemetrized(shift(), shift(Fraction(1, 8)))
    est, rows = relative_mdim(g, None, [Fraction(1, 4), Fraction(1, 16)], 3)
    assert est.slope == pytest.approx(0.0, abs=1e-12)
    for _, counts, _ in rows:
        assert all(c.hi == 1 for c in counts)


def test_relative_mdim_of_projection_sees_the_fiber():
    X = shift()
    est, rows = relative_mdim(ProjectLeft(Product(X, X)), None, [Fraction(1, 4), Fraction(1, 16)], 3)
    for _, _, rate in rows:
        assert rate.hi >= Fraction(math.log(2)) * Fraction(999, 1000)
    assert est.secant.lo <= 0 <= est.secant.hi
