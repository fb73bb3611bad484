from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdimlab.counting import max_separated, min_spanning
from mdimlab.exactnum import Interval
from mdimlab.metrics import (
    BowenEvaluator,
    Discrete,
    Norm1DBi,
    RandomEvaluator,
    SummedBi,
    SupBi,
    UltraShift,
    WeightedEvaluator,
    bowen_dist,
    diam,
    dist,
    is_ultrametric,
    ultra_depth,
    weighted_horizons,
)
from mdimlab.random import AffineNoise
from mdimlab.symbolic import (
    Alphabet,
    BiShift,
    BiWindow,
    DomainMismatch,
    IdentityRemetrized,
    OneSidedShift,
    Product,
    ProjectLeft,
    Word,
    build_grid,
)

Q = Fraction(1, 4)
X = OneSidedShift(Alphabet(2), UltraShift(Q))


# frozen values worked out by hand from the metric definitions
@pytest.mark.parametrize(
    "metric, p, q, expect",
    [
        (UltraShift(Q), Word((0, 1, 0)), Word((0, 0, 0)), Interval.exact(Q)),
        (UltraShift(Q), Word((0, 1, 0)), Word((0, 1, 0)), Interval(0, Fraction(1, 64))),
        (UltraShift(Q, "two"), BiWindow(-1, (0, 0, 0)), BiWindow(-1, (0, 1, 0)), Interval.exact(1)),
        (UltraShift(Q, "two"), BiWindow(-1, (0, 0, 0)), BiWindow(-1, (0, 0, 1)), Interval.exact(Q)),
        (UltraShift(Q, "two"), BiWindow(-1, (0, 0, 0)), BiWindow(-1, (0, 0, 0)), Interval(0, Q**2)),
        (SummedBi(Discrete()), BiWindow(-1, (0, 0, 0)), BiWindow(-1, (0, 0, 0)), Interval(0, 1)),
        (SummedBi(Discrete()), BiWindow(-1, (0, 1, 0)), BiWindow(-1, (0, 0, 1)), Interval(Fraction(3, 2), Fraction(5, 2))),
        (Norm1DBi(4), BiWindow(0, (1,)), BiWindow(0, (3,)), Interval(1, 3)),
        (
            SupBi(UltraShift(Q)),
            BiWindow(-1, (Word((0, 0)), Word((0, 1)), Word((1, 1)))),
            BiWindow(-1, (Word((0, 0)), Word((0, 0)), Word((1, 1)))),
            Interval.exact(Q),
        ),
    ],
)
def test_dist_frozen(metric, p, q, expect):
    assert dist(metric, p, q) == expect


def test_dist_domain_checks():
    with pytest.raises(DomainMismatch):
        dist(UltraShift(Q), BiWindow(0, (1,)), BiWindow(0, (1,)))
    with pytest.raises(DomainMismatch):
        dist(SummedBi(Discrete()), Word((0,)), Word((1,)))


def test_diam_and_ultrametric_flags():
    assert diam(Norm1DBi(5)) == 3
    assert is_ultrametric(SupBi(UltraShift(Q)))
    assert not is_ultrametric(Norm1DBi(5))


def test_bowen_dist_frozen():
    assert bowen_dist(X, 2, Word((0, 1, 1)), Word((0, 0, 1))) == Interval.exact(1)
    assert bowen_dist(X, 1, Word((0, 1, 1)), Word((0, 0, 1))) == Interval.exact(Q)


words = st.lists(st.integers(0, 2), min_size=6, max_size=6).map(lambda w: Word(w))


@given(words, words, words)
def test_ultrametric_inequality(x, y, z):
    m = UltraShift(Fraction(1, 3))
    assert dist(m, x, z).lo <= max(dist(m, x, y).hi, dist(m, y, z).hi)


@given(words, words)
def test_bowen_dist_monotone_in_horizon(x, y):
    S = OneSidedShift(Alphabet(3), UltraShift(Fraction(1, 3)))
    prev = Interval.exact(0)
    for n in range(1, 5):
        d = bowen_dist(S, n, x, y)
        assert d.lo >= prev.lo and d.hi >= prev.hi
        prev = d


@pytest.mark.parametrize(
    "b, delta, strict, k",
    [(Q, Fraction(9, 160), False, 3), (Q, Fraction(1, 16), False, 2), (Q, Fraction(1, 16), True, 3), (Q, 2, False, 0)],
)
def test_ultra_depth(b, delta, strict, k):
    assert ultra_depth(b, delta, strict) == k


def test_weighted_horizons():
    assert weighted_horizons((Fraction(1, 2), Fraction(1, 2)), 3) == (2, 3)
    with pytest.raises(ValueError):
        weighted_horizons((0, 1), 3)


def _generic(ev):
    ev.ultrametric = False
    return ev


SYSTEMS = [
    (X, 2, 2),
    (BiShift(Alphabet(2), UltraShift(Fraction(1, 2), "two")), 2, 2),
    (BiShift(X, SupBi(UltraShift(Q))), 1, 2),
    (Product(X, OneSidedShift(Alphabet(2), UltraShift(Fraction(1, 2)))), 2, 2),
]


@pytest.mark.parametrize("system, n, r", SYSTEMS)
@pytest.mark.parametrize("eps", [Fraction(9, 10), Fraction(9, 40), Fraction(1, 4)])
def test_class_keys_agree_with_matrix_path(system, n, r, eps):
    pts = list(build_grid(system, n, resolution=r))
    # a fixed subset keeps the generic path small; both paths see the same cells
    grid = [pts[i] for i in np.random.default_rng(1).permutation(len(pts))[:80]]
    fast = BowenEvaluator(system)
    slow = _generic(BowenEvaluator(system))
    if fast.key_function(n, eps, False) is None or any(
        fast.key(p, n, eps, False) is None for p in grid
    ):
        pytest.skip("grid too coarse for class keys")
    s_fast = max_separated(grid, fast, n, eps)
    s_slow = max_separated(grid, slow, n, eps)
    assert s_fast.exact and s_fast.lo in s_slow
    if len(grid) == len(pts):
        cf = fast.class_count(n, eps, False)
        assert cf is None or cf == s_fast.lo


def test_vectorized_matrix_matches_scalar():
    B = BiShift(Alphabet(3), Norm1DBi(3))
    pts = build_grid(B, 2, resolution=1).points[:30]
    ev = BowenEvaluator(B)
    M = ev.matrix(list(pts), 2)
    for i, j in itertools.product(range(30), repeat=2):
        assert M.interval(i, j) == bowen_dist(B, 2, pts[i], pts[j])


def test_random_evaluator_vector_path_matches_scalar():
    B = BiShift(Alphabet(2), Norm1DBi(2))
    rule = AffineNoise(2, ((1, BiWindow(-1, (1, 0, 1))), (2, BiWindow(0, (1, 1)))))
    ev = RandomEvaluator(B, rule, (2, 1, 2))
    pts = list(build_grid(B, 3, resolution=1).points[:20])
    M = ev.matrix(pts, 3)
    assert all(M.interval(i, j) == ev.dist(pts[i], pts[j], 3) for i in range(20) for j in range(20))


def test_interval_matrix_comparisons():
    B = BiShift(Alphabet(2), Norm1DBi(2))
    pts = list(build_grid(B, 1, resolution=1).points)
    M = BowenEvaluator(B).matrix(pts, 1)
    t = Fraction(1)
    assert np.array_equal(M.lo_gt(t), ~M.lo_le(t))
    assert np.array_equal(M.hi_lt(t), ~(M.hi_gt(t) | (M.hi_le(t) & ~M.hi_lt(t))))


def test_weighted_evaluator_profile_counts():
    Y = OneSidedShift(Alphabet(2), UltraShift(Fraction(1, 2)))
    f = ProjectLeft(Product(Y, X))
    ev = WeightedEvaluator(f, (Fraction(1, 2), Fraction(1, 2)))
    grid = build_grid(f.domain, 4, resolution=3)
    eps = Fraction(9, 20)
    keys = {ev.key(p, 4, eps, False) for p in grid}
    assert None not in keys and len(keys) == ev.class_count(4, eps, False)


def test_identity_weighted_metric_equals_finer_metric():
    Y = OneSidedShift(Alphabet(2), UltraShift(Fraction(1, 8)))
    g = IdentityRemetrized(Y, X)
    ev = WeightedEvaluator(g, (Fraction(1, 2), Fraction(1, 2)))
    for p, q in itertools.combinations(build_grid(X, 3, resolution=2).points, 2):
        assert ev.dist(p, q, 3) == bowen_dist(X, 3, p, q)
