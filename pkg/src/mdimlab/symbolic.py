"""Finite encodings of points in symbolic systems.

A point of an infinite product space is stored as the cylinder it lies in:
a ``Word`` is a prefix of a one-sided sequence, a ``BiWindow`` is a finite
window of a two-sided sequence, and a ``Pair`` joins points of two factors.
Systems know how to shift their points, enumerate grids of cylinders and
read off the coordinates that equivalence-class keys depend on.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterator, NamedTuple, Sequence

from .exactnum import Interval

DEFAULT_CAP = 2**22


def enumeration_cap() -> int:
    raw = os.environ.get("MDIM_CAP")
    return int(raw) if raw else DEFAULT_CAP


class BudgetExceeded(ValueError):
    """A shift would leave the represented window."""


class TooLarge(RuntimeError):
    """A grid would exceed the enumeration cap."""

    def __init__(self, needed: int, cap: int, what: str = "grid"):
        super().__init__(f"{what} needs {needed} cells, cap is {cap}")
        self.needed = needed
        self.cap = cap


class DomainMismatch(TypeError):
    pass


MISSING = object()


class Word(tuple):
    """Prefix ``x_0 ... x_{D-1}`` of a one-sided sequence."""

    __slots__ = ()

    @property
    def symbols(self) -> tuple:
        return tuple(self)

    @property
    def depth(self) -> int:
        return len(self)

    def __repr__(self) -> str:
        return "Word(" + "".join(map(str, self)) + ")"


@dataclass(frozen=True)
class BiWindow:
    """Coordinates ``low .. low+len(coords)-1`` of a two-sided sequence."""

    low: int
    coords: tuple

    def __post_init__(self):
        if not isinstance(self.coords, tuple):
            object.__setattr__(self, "coords", tuple(self.coords))

    @property
    def high(self) -> int:
        return self.low + len(self.coords) - 1

    def at(self, k: int):
        i = k - self.low
        if 0 <= i < len(self.coords):
            return self.coords[i]
        return None

    def known(self, k: int) -> bool:
        return self.low <= k <= self.high


class Pair(NamedTuple):
    left: Any
    right: Any


def meets_word(a: Sequence, b: Sequence) -> bool:
    k = min(len(a), len(b))
    return tuple(a[:k]) == tuple(b[:k])


def _meets_coord(a, b) -> bool:
    if isinstance(a, tuple):
        return meets_word(a, b)
    return a == b


# --- systems -------------------------------------------------------------


@dataclass(frozen=True)
class Alphabet:
    m: int
    offset: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("alphabet needs at least one symbol")

    @property
    def symbols(self) -> range:
        return range(self.offset, self.offset + self.m)


class System:
    """Shared plumbing; subclasses fill in the representation details."""

    metric: Any

    def shift(self, p, j: int):
        raise NotImplementedError

    def view(self, p):
        return p

    def cells(self, n: int, r: int) -> list:
        raise NotImplementedError

    def cell_count(self, n: int, r: int) -> int:
        raise NotImplementedError

    def prototype(self, n: int, r: int):
        return next(iter(self._iter_cells(n, r)))

    def _iter_cells(self, n: int, r: int) -> Iterator:
        raise NotImplementedError

    def meets(self, p, q) -> bool:
        raise NotImplementedError

    def extract(self, p, addr, depth: int):
        raise NotImplementedError

    def coord_size(self, addr) -> int:
        raise NotImplementedError

    def offset(self, addr, j: int):
        return addr + j

    @property
    def min_resolution(self) -> int:
        return 1


@dataclass(frozen=True)
class OneSidedShift(System):
    """Full shift on ``alphabet^N`` with an ultrametric on sequences."""

    alphabet: Alphabet
    metric: Any

    def shift(self, p: Word, j: int) -> Word:
        if not isinstance(p, Word):
            raise DomainMismatch(f"expected Word, got {type(p).__name__}")
        if j < 0:
            raise ValueError("negative shift")
        if j == 0:
            return p
        if j >= len(p):
            raise BudgetExceeded(f"shift {j} exhausts word of depth {len(p)}")
        return Word(p[j:])

    def depth_for(self, n: int, r: int) -> int:
        return n - 1 + r

    def _iter_cells(self, n, r):
        for w in itertools.product(self.alphabet.symbols, repeat=self.depth_for(n, r)):
            yield Word(w)

    def cells(self, n, r):
        return list(self._iter_cells(n, r))

    def cell_count(self, n, r):
        return self.alphabet.m ** self.depth_for(n, r)

    def meets(self, p, q) -> bool:
        return meets_word(p, q)

    def extract(self, p, addr, depth):
        if depth == 0:
            return ()
        return p[addr] if addr < len(p) else MISSING

    def coord_size(self, addr) -> int:
        return self.alphabet.m


@dataclass(frozen=True)
class BiShift(System):
    """Two-sided full shift over a base that is either an ``Alphabet`` or a
    ``OneSidedShift`` (the latter gives ``X^Z`` with ``X = A^N``)."""

    base: Any
    metric: Any

    @property
    def word_base(self) -> bool:
        return isinstance(self.base, OneSidedShift)

    @property
    def m(self) -> int:
        return self.base.alphabet.m if self.word_base else self.base.m

    def shift(self, p: BiWindow, j: int) -> BiWindow:
        if not isinstance(p, BiWindow):
            raise DomainMismatch(f"expected BiWindow, got {type(p).__name__}")
        if j < 0:
            raise ValueError("negative shift")
        if p.high - j < 0:
            raise BudgetExceeded(f"shift {j} moves window [{p.low}, {p.high}] past 0")
        return BiWindow(p.low - j, p.coords)

    def _coord_values(self, r: int) -> list:
        if self.word_base:
            return [Word(w) for w in itertools.product(self.base.alphabet.symbols, repeat=r)]
        return list(self.base.symbols)

    def _iter_cells(self, n, r):
        length = n + 2 * r
        vals = self._coord_values(r)
        for c in itertools.product(vals, repeat=length):
            yield BiWindow(-r, c)

    def cells(self, n, r):
        return list(self._iter_cells(n, r))

    def cell_count(self, n, r):
        length = n + 2 * r
        per = self.m**r if self.word_base else self.m
        return per**length

    def meets(self, p, q) -> bool:
        lo, hi = max(p.low, q.low), min(p.high, q.high)
        return all(_meets_coord(p.at(k), q.at(k)) for k in range(lo, hi + 1))

    def extract(self, p, addr, depth):
        if depth == 0:
            return ()
        c = p.at(addr)
        if c is None:
            return MISSING
        if self.word_base:
            if len(c) < depth:
                return MISSING
            return tuple(c[:depth])
        return c

    def coord_size(self, addr) -> int:
        return self.m

    @property
    def min_resolution(self) -> int:
        return 1


@dataclass(frozen=True)
class NaturalExtension(System):
    """Inverse limit of a one-sided shift.

    A point is stored as a symbol window ``a_low .. a_high``; its coordinate
    ``x_k`` is the sequence ``a_k a_{k+1} ...``, so ``view`` turns the window
    into a window of words that the summed metric can read.
    """

    base: OneSidedShift
    metric: Any = None

    def __post_init__(self):
        if self.metric is None:
            from .metrics import SummedBi

            object.__setattr__(self, "metric", SummedBi(self.base.metric))

    def shift(self, p: BiWindow, j: int) -> BiWindow:
        if not isinstance(p, BiWindow):
            raise DomainMismatch(f"expected BiWindow, got {type(p).__name__}")
        if p.high - j < 0:
            raise BudgetExceeded(f"shift {j} moves window past 0")
        return BiWindow(p.low - j, p.coords)

    def view(self, p: BiWindow) -> BiWindow:
        c = p.coords
        return BiWindow(p.low, tuple(Word(c[i:]) for i in range(len(c))))

    def zero_coordinate(self, p: BiWindow) -> Word:
        if not p.known(0):
            raise BudgetExceeded("window does not contain coordinate 0")
        return Word(p.coords[-p.low :])

    def _iter_cells(self, n, r):
        length = n + 3 * r
        for c in itertools.product(self.base.alphabet.symbols, repeat=length):
            yield BiWindow(-r, c)

    def cells(self, n, r):
        return list(self._iter_cells(n, r))

    def cell_count(self, n, r):
        return self.base.alphabet.m ** (n + 3 * r)

    def meets(self, p, q) -> bool:
        lo, hi = max(p.low, q.low), min(p.high, q.high)
        return all(p.at(k) == q.at(k) for k in range(lo, hi + 1))


@dataclass(frozen=True)
class Product(System):
    left: Any
    right: Any

    @property
    def metric(self):
        from .metrics import MaxProduct

        return MaxProduct(self.left.metric, self.right.metric)

    def shift(self, p: Pair, j: int) -> Pair:
        if not isinstance(p, Pair):
            raise DomainMismatch(f"expected Pair, got {type(p).__name__}")
        return Pair(self.left.shift(p.left, j), self.right.shift(p.right, j))

    def view(self, p: Pair) -> Pair:
        return Pair(self.left.view(p.left), self.right.view(p.right))

    def _iter_cells(self, n, r):
        rights = self.right.cells(n, r)
        for a in self.left._iter_cells(n, r):
            for b in rights:
                yield Pair(a, b)

    def cells(self, n, r):
        return list(self._iter_cells(n, r))

    def cell_count(self, n, r):
        return self.left.cell_count(n, r) * self.right.cell_count(n, r)

    def meets(self, p, q) -> bool:
        return self.left.meets(p.left, q.left) and self.right.meets(p.right, q.right)

    def extract(self, p, addr, depth):
        side, sub = addr
        return (self.left if side == "L" else self.right).extract(
            p.left if side == "L" else p.right, sub, depth
        )

    def coord_size(self, addr) -> int:
        side, sub = addr
        return (self.left if side == "L" else self.right).coord_size(sub)

    def offset(self, addr, j):
        side, sub = addr
        sys = self.left if side == "L" else self.right
        return (side, sys.offset(sub, j))


@dataclass(frozen=True)
class Skew(System):
    """Skew product ``(omega, x) -> (theta omega, T_omega x)``."""

    driving: BiShift
    fiber: Any
    rule: Any

    @property
    def metric(self):
        from .metrics import MaxProduct

        return MaxProduct(self.driving.metric, self.fiber.metric)

    def shift(self, p: Pair, j: int) -> Pair:
        if not isinstance(p, Pair):
            raise DomainMismatch(f"expected Pair, got {type(p).__name__}")
        return Pair(self.driving.shift(p.left, j), self.rule.apply(self.fiber, p.left, j, p.right))

    def view(self, p: Pair) -> Pair:
        return Pair(self.driving.view(p.left), self.fiber.view(p.right))

    def _iter_cells(self, n, r):
        fib = self.fiber.cells(self.rule.horizon(n), r)
        for w in self.driving._iter_cells(n, r):
            for x in fib:
                yield Pair(w, x)

    def cells(self, n, r):
        return list(self._iter_cells(n, r))

    def cell_count(self, n, r):
        return self.driving.cell_count(n, r) * self.fiber.cell_count(self.rule.horizon(n), r)

    def meets(self, p, q) -> bool:
        return self.driving.meets(p.left, q.left) and self.fiber.meets(p.right, q.right)


@dataclass(frozen=True)
class FiniteSpace(System):
    """A finite metric space with trivial dynamics; points are indices."""

    table: tuple  # tuple of tuples of Fractions

    @property
    def metric(self):
        from .metrics import FiniteTable

        return FiniteTable(self.table)

    @property
    def size(self) -> int:
        return len(self.table)

    def shift(self, p, j):
        return p

    def _iter_cells(self, n, r):
        return iter(range(self.size))

    def cells(self, n, r):
        return list(range(self.size))

    def cell_count(self, n, r):
        return self.size

    def meets(self, p, q) -> bool:
        return p == q


# --- grids ---------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    """Cylinder cells covering a system at Bowen horizon ``horizon``.

    ``density`` encloses the largest Bowen distance between a cell's
    representative and any point of the cell.
    """

    system: Any
    horizon: int
    resolution: int
    points: tuple
    density: Interval

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]


def build_grid(
    system,
    n: int,
    eps: Fraction | None = None,
    *,
    cap: int | None = None,
    resolution: int | None = None,
    target: Fraction | None = None,
) -> Grid:
    """Enumerate cells fine enough that every point is within ``eps/4`` of a
    cell representative in the Bowen metric at horizon ``n``.

    ``resolution`` fixes the refinement level directly (the resulting
    density is still reported); ``target`` overrides ``eps/4``.
    """
    from .metrics import bowen_dist

    n = max(1, n)
    cap = enumeration_cap() if cap is None else cap
    if isinstance(system, FiniteSpace):
        return Grid(system, n, 0, tuple(system.cells(n, 0)), Interval.exact(0))
    if resolution is None:
        if eps is None and target is None:
            raise ValueError("need eps, target or resolution")
        goal = Fraction(target) if target is not None else Fraction(eps) / 4
        r = system.min_resolution
        while True:
            proto = system.prototype(n, r)
            dens = bowen_dist(system, n, proto, proto)
            if dens.hi <= goal:
                break
            if system.cell_count(n, r) > cap:
                raise TooLarge(system.cell_count(n, r), cap)
            r += 1
    else:
        r = resolution
        proto = system.prototype(n, r)
        dens = bowen_dist(system, n, proto, proto)
    count = system.cell_count(n, r)
    if count > cap:
        raise TooLarge(count, cap)
    return Grid(system, n, r, tuple(system.cells(n, r)), Interval(0, dens.hi))


def fiber(factor, q, grid) -> list:
    """Cells of ``grid`` whose image under ``factor`` meets the cylinder ``q``."""
    cod = factor.codomain
    return [p for p in grid.points if cod.meets(factor.apply(p), q)]


# --- factor maps ---------------------------------------------------------


@dataclass(frozen=True)
class IdentityRemetrized:
    """Identity between two metrics on the same point space."""

    domain: Any
    codomain: Any

    def __post_init__(self):
        if type(self.domain) is not type(self.codomain):
            raise DomainMismatch("identity needs the same point space on both sides")

    def apply(self, p):
        return p

    def pull_profile(self, prof: dict) -> dict:
        return dict(prof)


@dataclass(frozen=True)
class ProjectLeft:
    domain: Product

    @property
    def codomain(self):
        return self.domain.left

    def apply(self, p):
        if not isinstance(p, Pair):
            raise DomainMismatch("ProjectLeft expects Pair points")
        return p.left

    def pull_profile(self, prof: dict) -> dict:
        return {("L", a): d for a, d in prof.items()}


@dataclass(frozen=True)
class ProjectDriver:
    domain: Skew

    @property
    def codomain(self):
        return self.domain.driving

    def apply(self, p):
        if not isinstance(p, Pair):
            raise DomainMismatch("ProjectDriver expects Pair points")
        return p.left

    def pull_profile(self, prof: dict):
        return None


@dataclass(frozen=True)
class ProjectZeroCoordinate:
    """``(x_k)_k -> x_0`` from a bi-shift over a one-sided base, or from a
    natural extension, onto the base."""

    domain: Any

    @property
    def codomain(self):
        return self.domain.base

    def apply(self, p):
        if not isinstance(p, BiWindow):
            raise DomainMismatch("ProjectZeroCoordinate expects BiWindow points")
        if isinstance(self.domain, NaturalExtension):
            return self.domain.zero_coordinate(p)
        c = p.at(0)
        if c is None:
            raise BudgetExceeded("window does not contain coordinate 0")
        return c

    def pull_profile(self, prof: dict):
        if isinstance(self.domain, BiShift) and self.domain.word_base:
            need = [a + 1 for a, d in prof.items() if d > 0]
            return {0: max(need)} if need else {}
        return None


def apply_factor(factor, p):
    return factor.apply(p)


def shift(system, p, j: int):
    return system.shift(p, j)
