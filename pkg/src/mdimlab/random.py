"""Random dynamical systems driven by a Bernoulli shift on ``{1, 2}^Z``.

A rule turns a driving sequence ``omega`` into maps ``T_omega^j``.  Driving
sequences may be given as a ``Word`` (``omega_0 omega_1 ...``), a plain tuple,
or a ``BiWindow`` (only the nonnegative coordinates are read).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from .counting import CountBracket, max_separated, min_spanning
from .exactnum import Interval, log_bracket
from .metrics import RandomEvaluator, SkewEvaluator, UltraShift, evaluator_for, profile
from .symbolic import Alphabet, BiShift, BiWindow, BudgetExceeded, Skew, Word


def omega_prefix(omega, n: int) -> tuple:
    """``omega_0 .. omega_{n-1}``."""
    if isinstance(omega, BiWindow):
        if omega.low > 0 or omega.high < n - 1:
            raise BudgetExceeded(f"driving window does not cover [0, {n - 1}]")
        return tuple(omega.at(k) for k in range(n))
    omega = tuple(omega)
    if len(omega) < n:
        raise BudgetExceeded(f"driving word shorter than {n}")
    return omega[:n]


@dataclass(frozen=True)
class PhiCounts:
    ones: int
    twos: int

    @property
    def displacement(self) -> int:
        return self.ones + 2 * self.twos


def phi_counts(omega, n: int) -> PhiCounts:
    """Occurrences of 1 and 2 among ``omega_0 .. omega_{n-1}``."""
    w = omega_prefix(omega, n)
    bad = set(w) - {1, 2}
    if bad:
        raise ValueError(f"driving symbols must be 1 or 2, got {sorted(bad)}")
    return PhiCounts(w.count(1), w.count(2))


@dataclass(frozen=True)
class PowerOfShift:
    """``T_omega = sigma**e(omega_0)``; by default ``e(1) = 1``, ``e(2) = 2``."""

    exponents: tuple = ((1, 1), (2, 2))

    @property
    def table(self) -> dict:
        return dict(self.exponents)

    def displacements(self, omega, n: int) -> list[int]:
        n = max(1, n)
        t = self.table
        w = omega_prefix(omega, n - 1)
        out = [0]
        for s in w:
            out.append(out[-1] + t[s])
        return out

    def displacement(self, omega, j: int) -> int:
        return self.displacements(omega, j + 1)[-1]

    def horizon(self, n: int) -> int:
        return max(self.table.values()) * (max(1, n) - 1) + 1

    def apply(self, system, omega, j: int, p):
        return system.shift(p, self.displacement(omega, j))

    def apply_array(self, system, omega, j, low, arr):
        return (low - self.displacement(omega, j), arr)


@dataclass(frozen=True)
class AffineNoise:
    """``T_omega x = sigma x + h(omega_0)`` on ``Z_m^Z``.

    ``noise`` maps each driving symbol to a finitely supported ``BiWindow``
    of group elements.
    """

    m: int
    noise: tuple  # ((symbol, BiWindow), ...)

    @property
    def table(self) -> dict:
        return dict(self.noise)

    def horizon(self, n: int) -> int:
        return max(1, n)

    def _noise_at(self, omega, j: int, k: int) -> int:
        """Coordinate ``k`` of ``sum_{t<j} sigma^{j-1-t} h(omega_t)``."""
        w = omega_prefix(omega, j)
        tab = self.table
        tot = 0
        for t, s in enumerate(w):
            h = tab[s]
            v = h.at(k + (j - 1 - t))
            if v is not None:
                tot += v
        return tot % self.m

    def apply(self, system, omega, j: int, p: BiWindow) -> BiWindow:
        q = system.shift(p, j)
        if j == 0:
            return q
        coords = tuple((c + self._noise_at(omega, j, q.low + i)) % self.m for i, c in enumerate(q.coords))
        return BiWindow(q.low, coords)

    def apply_array(self, system, omega, j, low, arr):
        low_j = low - j
        if j == 0:
            return (low_j, arr)
        L = arr.shape[1]
        vec = np.array([self._noise_at(omega, j, low_j + i) for i in range(L)], dtype=np.int64)
        return (low_j, np.mod(arr + vec[None, :], self.m))


@dataclass(frozen=True)
class DrivingSpec:
    """Bernoulli measure ``P(omega_0 = 1) = p1`` on ``{1, 2}^Z``."""

    p1: Fraction = Fraction(1, 2)
    b: Fraction = Fraction(1, 2)

    def __post_init__(self):
        p1 = Fraction(self.p1)
        if not 0 <= p1 <= 1:
            raise ValueError("p1 must lie in [0, 1]")
        object.__setattr__(self, "p1", p1)

    @property
    def p2(self) -> Fraction:
        return 1 - self.p1

    @property
    def system(self) -> BiShift:
        return BiShift(Alphabet(2, offset=1), UltraShift(self.b, "two"))

    def prob(self, word: Sequence[int]) -> Fraction:
        out = Fraction(1)
        for s in word:
            out *= self.p1 if s == 1 else self.p2
        return out


def driving_words(n: int) -> list[tuple]:
    return list(itertools.product((1, 2), repeat=max(0, n)))


def per_omega_separated(rule, omega, n: int, eps, grid, system=None, **kw) -> CountBracket:
    """Separated count of the fiber along ``T_omega`` at horizon ``n``."""
    system = grid.system if system is None else system
    ev = RandomEvaluator(system, rule, omega)
    return max_separated(grid, ev, n, eps, **kw)


def per_omega_spanning(rule, omega, n: int, eps, grid, system=None, **kw) -> CountBracket:
    system = grid.system if system is None else system
    ev = RandomEvaluator(system, rule, omega)
    return min_spanning(grid, ev, n, eps, **kw)


def _word_count(rule, omega, n, eps, fiber) -> int:
    """Exact fiber class count along ``omega`` from the agreement profile."""
    prof = profile(fiber, rule.displacements(omega, n), Fraction(eps), False)
    if prof is None:
        raise ValueError("exact per-omega counts need an ultrametric fiber")
    from .metrics import profile_count

    return profile_count(fiber, prof)


def expected_rate(rule, drive: DrivingSpec, n: int, eps, fiber, mode: str = "exact",
                  seed: int = 0, samples: int = 512) -> Interval:
    """Bracket of ``E_P[log s_n(omega)] / n``.

    ``exact`` sums over all ``2^(n-1)`` relevant driving words; ``montecarlo``
    samples words with a counter-based generator and returns a 99% interval
    widened by a fixed safety factor.
    """
    n = max(1, n)
    if mode == "exact":
        lo = hi = Fraction(0)
        for w in driving_words(n - 1):
            c = _word_count(rule, w, n, eps, fiber)
            lb = log_bracket(c, c)
            pr = drive.prob(w)
            lo += pr * lb.lo
            hi += pr * lb.hi
        return Interval(lo / n, hi / n)
    if mode == "montecarlo":
        rng = np.random.Generator(np.random.Philox(seed))
        draws = rng.random((samples, max(0, n - 1))) >= float(drive.p1)
        vals = np.empty(samples)
        for i, row in enumerate(draws):
            w = tuple(2 if d else 1 for d in row)
            vals[i] = math.log(_word_count(rule, w, n, eps, fiber)) / n
        mean = float(vals.mean())
        half = 1.2 * 2.576 * float(vals.std(ddof=1)) / math.sqrt(samples) if samples > 1 else math.inf
        return Interval(Fraction(mean - half), Fraction(mean + half))
    raise ValueError(f"unknown mode {mode!r}")


# --- averages over a maximal separated set of driving sequences ---------------


@dataclass
class AverageReport:
    s_bar: Interval
    r_bar: Interval
    omega_set_size: int
    spread: Fraction
    s_counts: list = field(default_factory=list)
    r_counts: list = field(default_factory=list)


def driving_separated_set(drive: DrivingSpec, n: int, eps, *, resolution: int | None = None,
                          seed: int | None = None) -> list[BiWindow]:
    """A maximal ``(n, eps)``-separated set of driving windows.

    Without ``seed`` it is the lexicographically least window of each class;
    with ``seed`` a random member of each class is taken instead.
    """
    from .symbolic import build_grid

    sysd = drive.system
    ev = evaluator_for(sysd)
    grid = build_grid(sysd, n, eps, resolution=resolution) if resolution else build_grid(sysd, n, eps)
    reps: dict = {}
    pts = list(grid.points)
    if seed is not None:
        order = np.random.default_rng(seed).permutation(len(pts))
        pts = [pts[i] for i in order]
    else:
        pts.sort(key=lambda w: w.coords)
    for w in pts:
        k = ev.key(w, n, Fraction(eps), False)
        if k is None:
            raise ValueError("driving grid too coarse for exact classes")
        reps.setdefault(k, w)
    return [reps[k] for k in sorted(reps)]


def average_rates(rule, drive: DrivingSpec, n: int, eps, fiber_grid, *, spread_seeds: int = 3,
                  resolution: int | None = None) -> AverageReport:
    """``s_bar_n`` and ``r_bar_n``: averages of per-omega counts over a maximal
    separated set of driving sequences."""
    n = max(1, n)
    eps = Fraction(eps)
    fiber = fiber_grid.system

    def avg(omegas):
        s_lo = s_hi = r_lo = r_hi = 0
        sc, rc = [], []
        for w in omegas:
            s = per_omega_separated(rule, w, n, eps, fiber_grid, fiber)
            r = per_omega_spanning(rule, w, n, eps, fiber_grid, fiber)
            sc.append(s)
            rc.append(r)
            s_lo += s.lo
            s_hi += s.hi
            r_lo += r.lo
            r_hi += r.hi
        k = len(omegas)
        return Interval(Fraction(s_lo, k), Fraction(s_hi, k)), Interval(Fraction(r_lo, k), Fraction(r_hi, k)), sc, rc

    base = driving_separated_set(drive, n, eps, resolution=resolution)
    s_bar, r_bar, sc, rc = avg(base)
    spread = Fraction(0)
    for seed in range(spread_seeds):
        other = driving_separated_set(drive, n, eps, resolution=resolution, seed=seed)
        s2, r2, _, _ = avg(other)
        spread = max(spread, abs(s2.mid - s_bar.mid), abs(r2.mid - r_bar.mid))
    return AverageReport(s_bar, r_bar, len(base), spread, sc, rc)


def skew_counts(rule, drive: DrivingSpec, n: int, eps, fiber, *, resolution: int = 1,
                cap: int | None = None) -> tuple[CountBracket, CountBracket]:
    """Separated and spanning counts of the skew product at horizon ``n``."""
    from .symbolic import build_grid

    sk = Skew(drive.system, fiber, rule)
    grid = build_grid(sk, n, eps, resolution=resolution, cap=cap)
    ev = SkewEvaluator(sk)
    return max_separated(grid, ev, n, eps), min_spanning(grid, ev, n, eps)


def skew_class_count(rule, drive: DrivingSpec, n: int, eps, fiber) -> int:
    """Closed-form class count of the skew product, summed over driving
    classes (the driving classes fix ``omega_0 .. omega_{n-2}``)."""
    n = max(1, n)
    eps = Fraction(eps)
    dev = evaluator_for(drive.system)
    dprof = dev.profile(n, eps, False)
    if any(dprof.get(i, 0) == 0 for i in range(n - 1)):
        raise ValueError("driving classes do not fix the displacement word")
    free = len([a for a, d in dprof.items() if d > 0]) - (n - 1)
    total = 0
    for w in driving_words(n - 1):
        total += _word_count(rule, w, n, eps, fiber)
    return total * 2**free


# --- expectations grouped by the number of 2s -----------------------------


def _rep_word(n: int, t: int) -> tuple:
    return (2,) * t + (1,) * (n - 1 - t)


def counts_by_twos(rule, n: int, eps, fiber, *, check: bool = False) -> list[int]:
    """Per-omega class counts for a representative word with ``t`` twos,
    ``t = 0 .. n-1``.

    For shift powers the displaced coordinates form a set whose gaps are 1
    or 2, and for the fibers used here the count depends only on how many
    gaps are 2.  ``check`` confirms this against every word.
    """
    n = max(1, n)
    out = [_word_count(rule, _rep_word(n, t), n, eps, fiber) for t in range(n)]
    if check:
        for w in driving_words(n - 1):
            if _word_count(rule, w, n, eps, fiber) != out[w.count(2)]:
                raise ValueError(f"count of {w} differs from its twos representative")
    return out


def twos_moments(drive: DrivingSpec, counts: Sequence[int]) -> tuple[Fraction, Interval]:
    """``E_P[c]`` and ``E_P[log c]`` for counts indexed by the number of 2s
    among ``len(counts) - 1`` driving symbols."""
    k = len(counts) - 1
    mean = Fraction(0)
    lo = hi = Fraction(0)
    for t, c in enumerate(counts):
        pr = math.comb(k, t) * drive.p1 ** (k - t) * drive.p2**t
        mean += pr * c
        lb = log_bracket(c, c)
        lo += pr * lb.lo
        hi += pr * lb.hi
    return mean, Interval(lo, hi)


def mean_count(rule, drive: DrivingSpec, n: int, eps, fiber, *, check: bool = False) -> Fraction:
    """``E_P[s_n(omega)]`` over the first ``n-1`` driving symbols."""
    return twos_moments(drive, counts_by_twos(rule, n, eps, fiber, check=check))[0]


def mean_log_count(rule, drive: DrivingSpec, n: int, eps, fiber, *, check: bool = False) -> Interval:
    """``E_P[log s_n(omega)]`` with outward-rounded logs."""
    return twos_moments(drive, counts_by_twos(rule, n, eps, fiber, check=check))[1]
