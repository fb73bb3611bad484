from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mdimlab.counting import closed_form_count
from mdimlab.metrics import Norm1DBi, SupBi, UltraShift, evaluator_for
from mdimlab.random import (
    AffineNoise,
    DrivingSpec,
    PowerOfShift,
    counts_by_twos,
    driving_separated_set,
    driving_words,
    expected_rate,
    mean_count,
    mean_log_count,
    per_omega_separated,
    phi_counts,
    twos_moments,
)
from mdimlab.symbolic import Alphabet, BiShift, BiWindow, BudgetExceeded, OneSidedShift, Word, build_grid

EPS = Fraction(9, 160)


def shift():
    return OneSidedShift(Alphabet(2), UltraShift(Fraction(1, 4)))


def lift():
    b = Fraction(1, 4)
    return BiShift(OneSidedShift(Alphabet(2), UltraShift(b)), SupBi(UltraShift(b)))


def test_phi_counts_and_displacement():
    c = phi_counts((1, 2, 2, 1, 2), 4)
    assert (c.ones, c.twos, c.displacement) == (2, 2, 6)
    assert phi_counts(Word((2, 2)), 2).twos == 2
    with pytest.raises(ValueError):
        phi_counts((1, 3), 2)
    with pytest.raises(BudgetExceeded):
        phi_counts((1,), 2)


def test_phi_counts_on_windows():
    w = BiWindow(-1, (2, 1, 2, 2))
    assert phi_counts(w, 3) == phi_counts((1, 2, 2), 3)
    with pytest.raises(BudgetExceeded):
        phi_counts(BiWindow(1, (1, 1)), 2)


def test_shift_power_displacements():
    rule = PowerOfShift()
    assert rule.displacements((2, 1, 2), 4) == [0, 2, 3, 5]
    assert rule.displacement((2, 1, 2), 2) == 3
    assert [rule.horizon(n) for n in (1, 2, 5)] == [1, 3, 9]


@given(st.lists(st.integers(min_value=1, max_value=2), min_size=0, max_size=12))
def test_last_displacement_is_phi_displacement(word):
    n = len(word) + 1
    assert PowerOfShift().displacements(word, n)[-1] == phi_counts(word, len(word)).displacement


def test_affine_noise_scalar_and_array_paths_agree():
    rng = np.random.default_rng(3)
    B = BiShift(Alphabet(3), Norm1DBi(3))
    noise = tuple((s, BiWindow(-2, tuple(int(v) for v in rng.integers(0, 3, 5)))) for s in (1, 2))
    rule = AffineNoise(3, noise)
    arr = rng.integers(0, 3, size=(6, 9))
    low = -4
    for omega in ((1, 2, 2), (2, 1, 1)):
        for j in range(4):
            lo_j, out = rule.apply_array(B, omega, j, low, arr)
            for row, orow in zip(arr, out):
                p = rule.apply(B, omega, j, BiWindow(low, tuple(int(v) for v in row)))
                assert p.low == lo_j and p.coords == tuple(int(v) for v in orow)


def test_zero_noise_is_the_shift():
    B = BiShift(Alphabet(2), Norm1DBi(2))
    rule = AffineNoise(2, ((1, BiWindow(0, (0,))), (2, BiWindow(0, (0, 0)))))
    p = BiWindow(-2, (1, 0, 1, 1, 0))
    assert rule.apply(B, (1, 2), 2, p) == B.shift(p, 2)


def test_driving_spec_probabilities():
    d = DrivingSpec(Fraction(1, 3))
    assert d.p2 == Fraction(2, 3)
    assert sum(d.prob(w) for w in driving_words(4)) == 1
    with pytest.raises(ValueError):
        DrivingSpec(Fraction(3, 2))


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_twos_representatives_and_endpoints(n):
    rule = PowerOfShift()
    counts = counts_by_twos(rule, n, EPS, shift(), check=True)
    # with depth-3 classes the all-1s word at horizon N has 2^(N+2) classes
    assert counts[0] == 2 ** (n + 2)
    assert counts[-1] == counts_by_twos(rule, 2 * n - 1, EPS, shift())[0] == 2 ** (2 * n + 1)


@pytest.mark.parametrize("n", [2, 4])
def test_twos_check_holds_on_the_lift(n):
    counts_by_twos(PowerOfShift(), n, EPS, lift(), check=True)


def test_twos_moments_degenerate_drives():
    counts = [4, 8, 32]
    assert twos_moments(DrivingSpec(1), counts)[0] == 4
    assert twos_moments(DrivingSpec(0), counts)[0] == 32
    mean, mlog = twos_moments(DrivingSpec(), counts)
    assert mean == Fraction(4 + 2 * 8 + 32, 4)
    assert mlog.lo <= Fraction((math.log(4) + 2 * math.log(8) + math.log(32)) / 4) <= mlog.hi


def test_mean_count_matches_per_word_separated_counts():
    rule, drive, X = PowerOfShift(), DrivingSpec(Fraction(1, 3)), shift()
    n = 3
    grid = build_grid(X, rule.horizon(n), resolution=3)
    direct = sum(drive.prob(w) * per_omega_separated(rule, Word(w), n, EPS, grid).lo for w in driving_words(n - 1))
    assert mean_count(rule, drive, n, EPS, X) == direct


def test_expected_rate_exact_matches_twos_moments():
    rule, drive, X = PowerOfShift(), DrivingSpec(), shift()
    n = 6
    ex = expected_rate(rule, drive, n, EPS, X)
    ml = mean_log_count(rule, drive, n, EPS, X)
    assert ex.lo <= ml.hi / n and ml.lo / n <= ex.hi
    assert ex.width < Fraction(1, 10**9)


def test_expected_rate_montecarlo_covers_exact():
    rule, drive, X = PowerOfShift(), DrivingSpec(), shift()
    ex = expected_rate(rule, drive, 8, EPS, X)
    mc = expected_rate(rule, drive, 8, EPS, X, mode="montecarlo", seed=1, samples=256)
    assert mc.lo <= ex.hi and ex.lo <= mc.hi
    again = expected_rate(rule, drive, 8, EPS, X, mode="montecarlo", seed=1, samples=256)
    assert again == mc
    with pytest.raises(ValueError):
        expected_rate(rule, drive, 2, EPS, X, mode="bogus")


@pytest.mark.parametrize("n", [1, 2, 3])
def test_driving_separated_set_is_one_per_class(n):
    drive = DrivingSpec()
    eps = Fraction(9, 40)
    omegas = driving_separated_set(drive, n, eps)
    cf = closed_form_count(evaluator_for(drive.system), n, eps)
    assert len(omegas) == cf.lo
    for seed in range(3):
        assert len(driving_separated_set(drive, n, eps, seed=seed)) == cf.lo
