"""Metrics on cylinder encodings, Bowen metrics and their evaluators.

``dist`` brackets the distance between two (unknown) points of two cylinders.
An evaluator binds a system (or a factor map, or a random orbit) to the
Bowen construction and offers three views of it to the counting layer:

* ``dist`` for single pairs,
* ``matrix`` for all pairs of a cell list at once,
* ``key`` for ultrametric cases, where the relation ``d_n <= eps`` is an
  equivalence whose classes are read off a coordinate profile.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Sequence

import numpy as np

from .exactnum import Interval, iv_max, pow_scalar
from .symbolic import (
    MISSING,
    BiShift,
    BiWindow,
    DomainMismatch,
    FiniteSpace,
    IdentityRemetrized,
    NaturalExtension,
    OneSidedShift,
    Pair,
    Product,
    ProjectLeft,
    Skew,
    Word,
)

# --- metric specifications ---------------------------------------------


@dataclass(frozen=True)
class Discrete:
    pass


@dataclass(frozen=True)
class CyclicNorm:
    """``min(|a-b|, m-|a-b|)`` on ``Z_m``, scaled to diameter 1."""

    m: int

    @property
    def half(self) -> int:
        return max(1, self.m // 2)


@dataclass(frozen=True)
class UltraShift:
    """``b**n(x, y)`` where ``n`` is the first disagreement index (one-sided)
    or the smallest ``|k|`` with ``x_k != y_k`` (two-sided)."""

    b: Fraction
    sided: str = "one"

    def __post_init__(self):
        b = Fraction(self.b)
        if not 0 < b < 1:
            raise ValueError("UltraShift needs 0 < b < 1")
        if self.sided not in ("one", "two"):
            raise ValueError("sided must be 'one' or 'two'")
        object.__setattr__(self, "b", b)

    @classmethod
    def from_exponent(cls, m: int, s: Fraction, sided: str = "one") -> "UltraShift":
        """``b = m**(-1/s)``; only exact when that is rational."""
        s = Fraction(s)
        root = Fraction(1, m) ** s.denominator
        b = _exact_root(root, s.numerator)
        if b is None:
            raise ValueError(f"m**(-1/s) is irrational for m={m}, s={s}")
        return cls(b, sided)

    def exponent(self, m: int) -> float:
        return math.log(m) / math.log(1 / self.b)


def _exact_root(x: Fraction, k: int) -> Fraction | None:
    from .exactnum import iroot

    a, c = iroot(x.numerator, k), iroot(x.denominator, k)
    if a**k == x.numerator and c**k == x.denominator:
        return Fraction(a, c)
    return None


@dataclass(frozen=True)
class SummedBi:
    """``sum_k 2**-|k| d(x_k, y_k)`` on two-sided sequences."""

    base: Any


@dataclass(frozen=True)
class SupBi:
    """``sup_k 2**-|k| d(x_k, y_k)``; ultrametric when the base is."""

    base: Any


@dataclass(frozen=True)
class MaxProduct:
    left: Any
    right: Any


@dataclass(frozen=True)
class FiniteTable:
    table: tuple


def Norm1DBi(m: int) -> SummedBi:
    return SummedBi(CyclicNorm(m))


def diam(metric) -> Fraction:
    if isinstance(metric, (Discrete, CyclicNorm, UltraShift)):
        return Fraction(1)
    if isinstance(metric, SummedBi):
        return 3 * diam(metric.base)
    if isinstance(metric, SupBi):
        return diam(metric.base)
    if isinstance(metric, MaxProduct):
        return max(diam(metric.left), diam(metric.right))
    if isinstance(metric, FiniteTable):
        return max((max(r) for r in metric.table), default=Fraction(0))
    raise TypeError(f"unknown metric {metric!r}")


def is_ultrametric(metric) -> bool:
    if isinstance(metric, (Discrete, UltraShift)):
        return True
    if isinstance(metric, CyclicNorm):
        return metric.m <= 3
    if isinstance(metric, SupBi):
        return is_ultrametric(metric.base)
    if isinstance(metric, MaxProduct):
        return is_ultrametric(metric.left) and is_ultrametric(metric.right)
    return False


# --- pointwise distances -------------------------------------------------


def _symbol_dist(metric, a, b) -> Fraction:
    if isinstance(metric, Discrete):
        return Fraction(int(a != b))
    if isinstance(metric, CyclicNorm):
        d = (a - b) % metric.m
        return Fraction(min(d, metric.m - d), metric.half)
    raise TypeError(f"{metric!r} is not a symbol metric")


def _word_dist(metric: UltraShift, p: Sequence, q: Sequence) -> Interval:
    L = min(len(p), len(q))
    for k in range(L):
        if p[k] != q[k]:
            v = pow_scalar(metric.b, k)
            return Interval(v, v)
    return Interval(Fraction(0), pow_scalar(metric.b, L))


def _unknown_radius(p: BiWindow, q: BiWindow) -> tuple[int, int, int]:
    """Common known range ``[lo, hi]`` and the least ``|k|`` outside it."""
    lo, hi = max(p.low, q.low), min(p.high, q.high)
    if lo > 0 or hi < 0:
        return lo, hi, 0
    return lo, hi, min(1 - lo, hi + 1)


def _base_dist(base, a, b) -> Interval:
    if isinstance(base, UltraShift):
        return _word_dist(base, a, b)
    v = _symbol_dist(base, a, b)
    return Interval(v, v)


def dist(metric, p, q) -> Interval:
    """Bracket of ``d(x, y)`` over all ``x`` in cylinder ``p``, ``y`` in ``q``."""
    if isinstance(metric, (Discrete, CyclicNorm)):
        v = _symbol_dist(metric, p, q)
        return Interval(v, v)
    if isinstance(metric, FiniteTable):
        v = Fraction(metric.table[p][q])
        return Interval(v, v)
    if isinstance(metric, UltraShift):
        if metric.sided == "one":
            if not isinstance(p, tuple) or not isinstance(q, tuple):
                raise DomainMismatch("one-sided UltraShift needs Word points")
            return _word_dist(metric, p, q)
        if not isinstance(p, BiWindow) or not isinstance(q, BiWindow):
            raise DomainMismatch("two-sided UltraShift needs BiWindow points")
        lo, hi, u = _unknown_radius(p, q)
        best = None
        for k in range(max(lo, -u), min(hi, u) + 1):
            if p.at(k) != q.at(k) and (best is None or abs(k) < best):
                best = abs(k)
        if best is not None and best <= u:
            v = pow_scalar(metric.b, best)
            return Interval(v, v)
        return Interval(Fraction(0), pow_scalar(metric.b, u))
    if isinstance(metric, SummedBi):
        if not isinstance(p, BiWindow) or not isinstance(q, BiWindow):
            raise DomainMismatch("SummedBi needs BiWindow points")
        lo_k, hi_k, _ = _unknown_radius(p, q)
        s_lo = s_hi = Fraction(0)
        known_w = Fraction(0)
        for k in range(lo_k, hi_k + 1):
            w = Fraction(1, 2 ** abs(k))
            d = _base_dist(metric.base, p.at(k), q.at(k))
            s_lo += w * d.lo
            s_hi += w * d.hi
            known_w += w
        s_hi += diam(metric.base) * (3 - known_w)
        return Interval(s_lo, s_hi)
    if isinstance(metric, SupBi):
        if not isinstance(p, BiWindow) or not isinstance(q, BiWindow):
            raise DomainMismatch("SupBi needs BiWindow points")
        lo_k, hi_k, u = _unknown_radius(p, q)
        m_lo = Fraction(0)
        m_hi = diam(metric.base) / 2**u
        for k in range(lo_k, hi_k + 1):
            w = Fraction(1, 2 ** abs(k))
            d = _base_dist(metric.base, p.at(k), q.at(k))
            m_lo = max(m_lo, w * d.lo)
            m_hi = max(m_hi, w * d.hi)
        return Interval(m_lo, m_hi)
    if isinstance(metric, MaxProduct):
        if not isinstance(p, Pair) or not isinstance(q, Pair):
            raise DomainMismatch("MaxProduct needs Pair points")
        return iv_max(dist(metric.left, p.left, q.left), dist(metric.right, p.right, q.right))
    raise TypeError(f"unknown metric {metric!r}")


def bowen_dist(system, n: int, p, q, metric=None) -> Interval:
    """``max_{j<n} d(T^j x, T^j y)`` bracketed over the two cylinders."""
    metric = system.metric if metric is None else metric
    n = max(1, n)
    out = None
    for j in range(n):
        d = dist(metric, system.view(system.shift(p, j)), system.view(system.shift(q, j)))
        out = d if out is None else iv_max(out, d)
    return out


def _ceil(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def weighted_horizons(a: tuple, n: int) -> tuple[int, int]:
    a1, a2 = Fraction(a[0]), Fraction(a[1])
    if a1 <= 0 or a2 < 0:
        raise ValueError("weights need a1 > 0 and a2 >= 0")
    n = max(1, n)
    return _ceil(a1 * n), _ceil((a1 + a2) * n)


def weighted_bowen_dist(factor, a: tuple, n: int, p, q) -> Interval:
    """``max((d_X)_{ceil(a1 n)}(x, y), (d_Y)_{ceil((a1+a2) n)}(pi x, pi y))``."""
    nx, ny = weighted_horizons(a, n)
    dx = bowen_dist(factor.domain, nx, p, q)
    dy = bowen_dist(factor.codomain, ny, factor.apply(p), factor.apply(q))
    return iv_max(dx, dy)


def random_bowen_dist(system, rule, omega, n: int, p, q) -> Interval:
    """Bowen distance along the random orbit ``T_omega^j``."""
    n = max(1, n)
    out = None
    for j in range(n):
        d = dist(
            system.metric,
            system.view(rule.apply(system, omega, j, p)),
            system.view(rule.apply(system, omega, j, q)),
        )
        out = d if out is None else iv_max(out, d)
    return out


# --- ultrametric profiles -------------------------------------------------


def ultra_depth(b: Fraction, delta: Fraction, strict: bool) -> int:
    """Least ``k`` with ``b**k <= delta`` (``< delta`` when strict)."""
    if delta <= 0:
        raise ValueError("threshold must be positive")
    k, v = 0, Fraction(1)
    while (v >= delta) if strict else (v > delta):
        k += 1
        v *= b
    return k


def _base_depth(base, delta: Fraction, strict: bool) -> int:
    if isinstance(base, (Discrete, CyclicNorm)):
        if strict:
            return 0 if delta > 1 else 1
        return 0 if delta >= 1 else 1
    if isinstance(base, UltraShift):
        return ultra_depth(base.b, delta, strict)
    raise TypeError(f"no depth rule for base {base!r}")


def _zero_profile(system, metric, eps: Fraction, strict: bool) -> dict | None:
    """Coordinates (and depths) on which two points must agree for
    ``d(x, y) <= eps`` (``< eps`` when strict), at shift 0."""
    if isinstance(system, OneSidedShift) and isinstance(metric, UltraShift):
        K = ultra_depth(metric.b, eps, strict)
        return {i: 1 for i in range(K)}
    if isinstance(system, BiShift) and not system.word_base:
        if isinstance(metric, UltraShift) and metric.sided == "two":
            K = ultra_depth(metric.b, eps, strict)
            return {i: 1 for i in range(-K + 1, K)}
    if isinstance(system, BiShift) and isinstance(metric, SupBi):
        if not is_ultrametric(metric.base):
            return None
        prof = {}
        t = 0
        while True:
            d = _base_depth(metric.base, eps * 2**t, strict)
            if d == 0:
                break
            prof[t] = d
            prof[-t] = d
            t += 1
        return prof
    if isinstance(system, Product) and isinstance(metric, MaxProduct):
        left = _zero_profile(system.left, metric.left, eps, strict)
        right = _zero_profile(system.right, metric.right, eps, strict)
        if left is None or right is None:
            return None
        out = {("L", a): d for a, d in left.items()}
        out.update({("R", a): d for a, d in right.items()})
        return out
    return None


@functools.lru_cache(maxsize=256)
def _zero_profile_cached(system, eps: Fraction, strict: bool) -> dict | None:
    # callers must not mutate the returned dict
    return _zero_profile(system, system.metric, eps, strict)


def merge_profiles(*profs: dict | None) -> dict | None:
    out: dict = {}
    for prof in profs:
        if prof is None:
            return None
        for a, d in prof.items():
            if d > out.get(a, 0):
                out[a] = d
    return out


def profile(system, shifts: Iterable[int], eps: Fraction, strict: bool) -> dict | None:
    """Merged agreement profile of ``max_{j in shifts} d(sigma^j x, sigma^j y)``."""
    base = _zero_profile_cached(system, Fraction(eps), strict)
    if base is None:
        return None
    if isinstance(system, (OneSidedShift, BiShift)) and base:
        # integer addresses shift by plain addition
        js = np.fromiter(shifts, dtype=np.int64)
        if js.size == 0:
            return {}
        addrs = np.array(list(base), dtype=np.int64)
        depth = np.array(list(base.values()), dtype=np.int64)
        lo = int(js.min() + addrs.min())
        acc = np.zeros(int(js.max() + addrs.max()) - lo + 1, dtype=np.int64)
        for a, d in zip(addrs, depth):
            np.maximum.at(acc, js + (a - lo), d)
        return {int(i) + lo: int(d) for i, d in enumerate(acc) if d > 0}
    out: dict = {}
    for j in shifts:
        for a, d in base.items():
            aj = system.offset(a, j)
            if d > out.get(aj, 0):
                out[aj] = d
    return out


def key_getter(system, prof: dict):
    """Compiled form of ``profile_key`` for one profile."""
    addrs = [(a, prof[a]) for a in sorted(prof) if prof[a] > 0]
    if isinstance(system, OneSidedShift):
        idx = [a for a, _ in addrs]
        need = max(idx) + 1 if idx else 0

        def get(p):
            if len(p) < need:
                return None
            return tuple([p[i] for i in idx])

        return get
    if isinstance(system, BiShift):
        if system.word_base:
            def get(p):
                lo, c = p.low, p.coords
                out = []
                for a, d in addrs:
                    i = a - lo
                    if i < 0 or i >= len(c) or len(c[i]) < d:
                        return None
                    out.append(c[i][:d])
                return tuple(out)

            return get
        idx = [a for a, _ in addrs]
        if not idx:
            return lambda p: ()
        amin, amax = min(idx), max(idx)

        def get(p):
            lo, c = p.low, p.coords
            if amin < lo or amax - lo >= len(c):
                return None
            return tuple([c[a - lo] for a in idx])

        return get
    if isinstance(system, Product):
        left = key_getter(system.left, {a[1]: d for a, d in prof.items() if a[0] == "L"})
        right = key_getter(system.right, {a[1]: d for a, d in prof.items() if a[0] == "R"})

        def get(p):
            kl = left(p.left)
            if kl is None:
                return None
            kr = right(p.right)
            return None if kr is None else (kl, kr)

        return get
    return lambda p: profile_key(system, p, prof)


def profile_key(system, p, prof: dict):
    key = []
    for a in sorted(prof):
        d = prof[a]
        if d == 0:
            continue
        v = system.extract(p, a, d)
        if v is MISSING:
            return None
        key.append(v)
    return tuple(key)


def profile_count(system, prof: dict) -> int:
    if isinstance(system, (OneSidedShift, BiShift)):
        m = system.alphabet.m if isinstance(system, OneSidedShift) else system.m
        return m ** sum(prof.values())
    out = 1
    for a, d in prof.items():
        out *= system.coord_size(a) ** d
    return out


# --- interval matrices ---------------------------------------------------

_SAFE = 2**62


@dataclass
class IntervalMatrix:
    """All-pairs distance brackets as integer numerators over ``den``."""

    lo: np.ndarray
    hi: np.ndarray
    den: int

    def __len__(self):
        return self.lo.shape[0]

    def _cmp(self, arr: np.ndarray, t: Fraction, op: str) -> np.ndarray:
        t = Fraction(t)
        p, q = t.numerator, t.denominator
        rhs = p * self.den
        a = arr
        if a.dtype != object:
            bound = int(np.abs(a).max(initial=0)) * q
            if bound >= _SAFE or rhs >= _SAFE:
                a = a.astype(object)
        lhs = a * q
        if op == ">":
            res = lhs > rhs
        elif op == ">=":
            res = lhs >= rhs
        elif op == "<=":
            res = lhs <= rhs
        else:
            res = lhs < rhs
        return np.asarray(res, dtype=bool)

    def lo_gt(self, t):
        return self._cmp(self.lo, t, ">")

    def lo_ge(self, t):
        return self._cmp(self.lo, t, ">=")

    def lo_le(self, t):
        return self._cmp(self.lo, t, "<=")

    def lo_lt(self, t):
        return self._cmp(self.lo, t, "<")

    def hi_le(self, t):
        return self._cmp(self.hi, t, "<=")

    def hi_lt(self, t):
        return self._cmp(self.hi, t, "<")

    def hi_gt(self, t):
        return self._cmp(self.hi, t, ">")

    def take(self, idx) -> "IntervalMatrix":
        idx = np.asarray(idx, dtype=int)
        return IntervalMatrix(self.lo[np.ix_(idx, idx)], self.hi[np.ix_(idx, idx)], self.den)

    def interval(self, i: int, j: int) -> Interval:
        return Interval(Fraction(int(self.lo[i, j]), self.den), Fraction(int(self.hi[i, j]), self.den))


def _pack(lo_fr: list[list[Fraction]], hi_fr: list[list[Fraction]]) -> IntervalMatrix:
    den = 1
    for rows in (lo_fr, hi_fr):
        for row in rows:
            for v in row:
                den = math.lcm(den, v.denominator)
    N = len(lo_fr)
    lo = np.empty((N, N), dtype=object)
    hi = np.empty((N, N), dtype=object)
    for i in range(N):
        for j in range(N):
            lo[i, j] = lo_fr[i][j].numerator * (den // lo_fr[i][j].denominator)
            hi[i, j] = hi_fr[i][j].numerator * (den // hi_fr[i][j].denominator)
    top = max((int(x) for x in hi.flat), default=0)
    if top < _SAFE:
        lo, hi = lo.astype(np.int64), hi.astype(np.int64)
    return IntervalMatrix(lo, hi, den)


def _summed_window_matrix(steps: list[tuple[int, np.ndarray]], base) -> IntervalMatrix:
    """Vectorized Bowen matrix for ``SummedBi`` over symbols.

    ``steps`` lists, per Bowen step, the window's low index and the ``(N, L)``
    array of symbols after applying the step's map.
    """
    if isinstance(base, Discrete):
        half, m = 1, None
    elif isinstance(base, CyclicNorm):
        half, m = base.half, base.m
    else:
        raise TypeError("vectorized path needs a symbol base")
    M = 0
    for low, arr in steps:
        L = arr.shape[1]
        M = max(M, abs(low), abs(low + L - 1))
    M += 1
    den = (2**M) * half
    N = steps[0][1].shape[0]
    LO = np.zeros((N, N), dtype=np.int64)
    HI = np.zeros((N, N), dtype=np.int64)
    for low, arr in steps:
        L = arr.shape[1]
        acc = np.zeros((N, N), dtype=np.int64)
        known = Fraction(0)
        for t in range(L):
            k = low + t
            w = 2 ** (M - abs(k))
            col = arr[:, t]
            diff = col[:, None] - col[None, :]
            if m is None:
                c = (diff != 0).astype(np.int64)
            else:
                d = np.mod(diff, m)
                c = np.minimum(d, m - d).astype(np.int64)
            acc += w * c
            known += Fraction(1, 2 ** abs(k))
        tail = (3 - known) * den
        assert tail.denominator == 1
        LO = np.maximum(LO, acc)
        HI = np.maximum(HI, acc + int(tail))
    return IntervalMatrix(LO, HI, den)


def _uniform_windows(points: Sequence) -> np.ndarray | None:
    if not points or not all(isinstance(p, BiWindow) for p in points):
        return None
    low, L = points[0].low, len(points[0].coords)
    if any(p.low != low or len(p.coords) != L for p in points):
        return None
    if not all(isinstance(c, int) for c in points[0].coords):
        return None
    return np.array([p.coords for p in points], dtype=np.int64).reshape(len(points), L)


# --- evaluators ----------------------------------------------------------


class Evaluator:
    """Bowen-type distance on cells, with caching and fast paths."""

    system: Any
    ultrametric: bool = False

    def __init__(self):
        self._cache: dict = {}
        self._prof: dict = {}

    def _raw(self, p, q, n) -> Interval:
        raise NotImplementedError

    def dist(self, p, q, n: int) -> Interval:
        n = max(1, n)
        k = (p, q, n)
        v = self._cache.get(k)
        if v is None:
            v = self._raw(p, q, n)
            self._cache[k] = v
            self._cache[(q, p, n)] = v
        return v

    def profile(self, n: int, eps: Fraction, strict: bool) -> dict | None:
        return None

    def key(self, p, n: int, eps: Fraction, strict: bool):
        fn = self.key_function(n, eps, strict)
        return None if fn is None else fn(p)

    def key_function(self, n: int, eps: Fraction, strict: bool):
        """Map from cells to class keys of ``d_n <= eps`` (``< eps`` when
        strict); keys are None where the cell is too coarse."""
        prof = self._cached_profile(n, eps, strict)
        if prof is None:
            return None
        return key_getter(self.system, prof)

    def _cached_profile(self, n, eps, strict):
        k = (max(1, n), Fraction(eps), strict)
        if k not in self._prof:
            self._prof[k] = self.profile(*k) if self.ultrametric else None
        return self._prof[k]

    def class_count(self, n: int, eps: Fraction, strict: bool) -> int | None:
        """Number of classes of ``d_n <= eps`` over the whole space, when a
        product-form profile exists."""
        prof = self._cached_profile(n, eps, strict)
        if prof is None:
            return None
        return profile_count(self.system, prof)

    def window_steps(self, arr: np.ndarray, low: int, n: int):
        return None

    def vector_base(self):
        return None

    def matrix(self, points: Sequence, n: int) -> IntervalMatrix:
        n = max(1, n)
        base = self.vector_base()
        if base is not None:
            arr = _uniform_windows(points)
            if arr is not None:
                steps = self.window_steps(arr, points[0].low, n)
                if steps is not None:
                    return _summed_window_matrix(steps, base)
        N = len(points)
        lo = [[Fraction(0)] * N for _ in range(N)]
        hi = [[Fraction(0)] * N for _ in range(N)]
        for i in range(N):
            for j in range(i, N):
                d = self.dist(points[i], points[j], n)
                lo[i][j] = lo[j][i] = d.lo
                hi[i][j] = hi[j][i] = d.hi
        return _pack(lo, hi)


def _summed_symbol_base(system) -> Any:
    if isinstance(system, BiShift) and not system.word_base and isinstance(system.metric, SummedBi):
        if isinstance(system.metric.base, (Discrete, CyclicNorm)):
            return system.metric.base
    return None


class BowenEvaluator(Evaluator):
    def __init__(self, system):
        super().__init__()
        self.system = system
        self.ultrametric = is_ultrametric(system.metric) and not isinstance(
            system, (NaturalExtension, FiniteSpace)
        )

    def _raw(self, p, q, n):
        return bowen_dist(self.system, n, p, q)

    def profile(self, n, eps, strict):
        return profile(self.system, range(n), eps, strict)

    def vector_base(self):
        return _summed_symbol_base(self.system)

    def window_steps(self, arr, low, n):
        return [(low - j, arr) for j in range(n)]


class FiniteEvaluator(Evaluator):
    """Exact distances on a finite metric space (trivial dynamics)."""

    def __init__(self, system: FiniteSpace):
        super().__init__()
        self.system = system

    def _raw(self, p, q, n):
        v = Fraction(self.system.table[p][q])
        return Interval(v, v)

    def matrix(self, points, n):
        N = len(points)
        lo = [[Fraction(self.system.table[a][b]) for b in points] for a in points]
        return _pack(lo, lo)


class SkewEvaluator(BowenEvaluator):
    """Bowen metric of a skew product.

    Classes factor as (driving class, fiber class along the common orbit)
    as soon as the driving class pins ``omega_0 .. omega_{n-2}``.
    """

    def __init__(self, system: Skew):
        super().__init__(system)
        self.drive = BowenEvaluator(system.driving)

    def key_function(self, n, eps, strict):
        if not self.ultrametric:
            return None
        n = max(1, n)
        eps = Fraction(eps)
        dprof = self.drive._cached_profile(n, eps, strict)
        if dprof is None:
            return None
        if any(dprof.get(i, 0) == 0 for i in range(n - 1)):
            return None
        dget = key_getter(self.system.driving, dprof)
        rule, fib = self.system.rule, self.system.fiber
        dcache: dict = {}
        fcache: dict = {}

        def get(p):
            w = p.left
            ck = (w.low, w.coords)
            hit = dcache.get(ck)
            if hit is None:
                dkey = dget(w)
                if dkey is None:
                    return None
                shifts = tuple(rule.displacements(w, n))
                fget = fcache.get(shifts)
                if fget is None:
                    fprof = profile(fib, shifts, eps, strict)
                    if fprof is None:
                        return None
                    fget = fcache[shifts] = key_getter(fib, fprof)
                hit = dcache[ck] = (dkey, shifts, fget)
            fkey = hit[2](p.right)
            if fkey is None:
                return None
            return (hit[0], hit[1], fkey)

        return get

    def class_count(self, n, eps, strict):
        return None


class WeightedEvaluator(Evaluator):
    """The metric ``D^a_n`` attached to a factor map."""

    def __init__(self, factor, a: tuple):
        super().__init__()
        self.factor = factor
        self.a = (Fraction(a[0]), Fraction(a[1]))
        self.system = factor.domain
        self.ultrametric = (
            is_ultrametric(factor.domain.metric)
            and is_ultrametric(factor.codomain.metric)
            and isinstance(factor, (IdentityRemetrized, ProjectLeft))
        )

    def _raw(self, p, q, n):
        return weighted_bowen_dist(self.factor, self.a, n, p, q)

    def profile(self, n, eps, strict):
        nx, ny = weighted_horizons(self.a, n)
        dom = profile(self.factor.domain, range(nx), eps, strict)
        cod = profile(self.factor.codomain, range(ny), eps, strict)
        if dom is None or cod is None:
            return None
        return merge_profiles(dom, self.factor.pull_profile(cod))


class RandomEvaluator(Evaluator):
    """Bowen metric along ``T_omega^j`` for one driving word ``omega``."""

    def __init__(self, system, rule, omega):
        super().__init__()
        self.system = system
        self.rule = rule
        self.omega = omega
        self.ultrametric = is_ultrametric(system.metric) and hasattr(rule, "displacements")

    def _raw(self, p, q, n):
        return random_bowen_dist(self.system, self.rule, self.omega, n, p, q)

    def profile(self, n, eps, strict):
        return profile(self.system, self.rule.displacements(self.omega, n), eps, strict)

    def vector_base(self):
        return _summed_symbol_base(self.system)

    def window_steps(self, arr, low, n):
        if not hasattr(self.rule, "apply_array"):
            return None
        return [self.rule.apply_array(self.system, self.omega, j, low, arr) for j in range(n)]


def evaluator_for(system) -> Evaluator:
    if isinstance(system, FiniteSpace):
        return FiniteEvaluator(system)
    if isinstance(system, Skew):
        return SkewEvaluator(system)
    return BowenEvaluator(system)
