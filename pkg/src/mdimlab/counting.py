"""Certified counts of separated sets, spanning sets and covers.

Each function returns a ``CountBracket``.  Ultrametric cases are exact: the
relation ``d_n <= eps`` is an equivalence and every count equals the number
of its classes.  Otherwise the counts come from interval distance matrices,
with undecided pairs treated pessimistically on each side of the bracket.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from .exactnum import Interval, rational_power
from .metrics import Evaluator, evaluator_for, profile_count
from .metrics import diam as mdiam
from .symbolic import Grid, OneSidedShift, Pair, Product, ProjectLeft, TooLarge, Word

EXACT_CUTOFF = 24
# the domain-count floor needs a full distance matrix on non-ultrametric domains
DOMAIN_FLOOR_LIMIT = 128


class DensityTooCoarse(ValueError):
    pass


@dataclass(frozen=True)
class CountBracket:
    lo: int
    hi: int | None  # None: no finite certified ceiling
    method: str

    def __post_init__(self):
        if self.lo < 0 or (self.hi is not None and self.hi < self.lo):
            raise ValueError(f"bad count bracket [{self.lo}, {self.hi}]")

    @property
    def exact(self) -> bool:
        return self.hi == self.lo

    def __contains__(self, v: int) -> bool:
        return self.lo <= v and (self.hi is None or v <= self.hi)


def _unpack(points) -> tuple[list, Grid | None]:
    if isinstance(points, Grid):
        return list(points.points), points
    return list(points), None


def _class_count(pts, ev: Evaluator, n, eps, strict) -> int | None:
    if not ev.ultrametric:
        return None
    fn = ev.key_function(n, eps, strict)
    if fn is None:
        return None
    keys = set(map(fn, pts))
    if None in keys:
        return None
    return len(keys)


# --- graph helpers (adjacency as boolean numpy matrices) --------------------


def components(adj: np.ndarray) -> list[np.ndarray]:
    N = adj.shape[0]
    seen = np.zeros(N, dtype=bool)
    out = []
    for s in range(N):
        if seen[s]:
            continue
        comp = np.zeros(N, dtype=bool)
        comp[s] = True
        frontier = comp.copy()
        while frontier.any():
            nxt = adj[frontier].any(axis=0) & ~comp
            comp |= nxt
            frontier = nxt
        seen |= comp
        out.append(np.flatnonzero(comp))
    return out


def _bitsets(adj: np.ndarray) -> list[int]:
    out = []
    for row in adj:
        v = 0
        for i in np.flatnonzero(row):
            v |= 1 << int(i)
        out.append(v)
    return out


def _clique_partition_bits(cand: int, nbr: list[int]) -> int:
    """Greedy number of cliques covering ``cand``; bounds any independent
    subset of ``cand`` from above."""
    count = 0
    while cand:
        v = (cand & -cand).bit_length() - 1
        clique_common = nbr[v]
        cand &= ~(1 << v)
        avail = cand & clique_common
        while avail:
            u = (avail & -avail).bit_length() - 1
            cand &= ~(1 << u)
            clique_common &= nbr[u]
            avail = cand & clique_common
        count += 1
    return count


def mis_exact(adj: np.ndarray) -> int:
    """Maximum independent set by branch and bound (small graphs)."""
    k = adj.shape[0]
    a = adj.copy()
    np.fill_diagonal(a, False)
    nbr = _bitsets(a)
    best = 0

    def rec(cand: int, size: int):
        nonlocal best
        if cand == 0:
            best = max(best, size)
            return
        if size + _clique_partition_bits(cand, nbr) <= best:
            return
        # a vertex with no neighbours left can always be taken
        v_best, deg_best = -1, -1
        c = cand
        while c:
            v = (c & -c).bit_length() - 1
            c &= c - 1
            d = bin(nbr[v] & cand).count("1")
            if d == 0:
                rec(cand & ~(1 << v), size + 1)
                return
            if d > deg_best:
                v_best, deg_best = v, d
        v = v_best
        rec(cand & ~(1 << v) & ~nbr[v], size + 1)
        rec(cand & ~(1 << v), size)

    rec((1 << k) - 1, 0)
    return best


def mis_greedy(adj: np.ndarray) -> int:
    a = adj.copy()
    np.fill_diagonal(a, False)
    alive = np.ones(a.shape[0], dtype=bool)
    count = 0
    while alive.any():
        deg = (a & alive[None, :]).sum(axis=1)
        deg = np.where(alive, deg, np.iinfo(np.int64).max)
        v = int(np.argmin(deg))
        alive[v] = False
        alive &= ~a[v]
        count += 1
    return count


def clique_partition(adj: np.ndarray, order: Sequence[int] | None = None) -> list[list[int]]:
    """Greedy partition of the vertices into cliques of ``adj``."""
    a = adj.copy()
    np.fill_diagonal(a, True)
    N = a.shape[0]
    if order is None:
        order = np.argsort(-a.sum(axis=1), kind="stable")
    groups: list[list[int]] = []
    common: list[np.ndarray] = []
    for v in order:
        v = int(v)
        for g, c in zip(groups, common):
            if c[v]:
                g.append(v)
                c &= a[v]
                break
        else:
            groups.append([v])
            common.append(a[v].copy())
    return groups


def _is_clique(adj: np.ndarray) -> bool:
    k = adj.shape[0]
    return bool(adj.sum() - np.trace(adj) == k * (k - 1))


def independence_bracket(conflict: np.ndarray, cutoff: int, upper: bool) -> tuple[int, bool]:
    """Independence number of ``conflict``: exact per component when small,
    otherwise a greedy lower bound or a clique-partition upper bound."""
    total, exact = 0, True
    a = conflict.copy()
    np.fill_diagonal(a, False)
    for comp in components(a):
        if len(comp) == 1:
            total += 1
            continue
        sub = a[np.ix_(comp, comp)]
        if _is_clique(sub):
            total += 1
        elif len(comp) <= cutoff:
            total += mis_exact(sub)
        elif upper:
            total += len(clique_partition(sub))
            exact = False
        else:
            total += mis_greedy(sub)
            exact = False
    return total, exact


def set_cover_exact(sets: list[int], universe: int) -> int:
    """Minimum number of bitmask ``sets`` covering ``universe``."""
    sets = [s & universe for s in sets if s & universe]
    if universe == 0:
        return 0
    best = set_cover_greedy(sets, universe)
    if best is None:
        raise ValueError("sets do not cover the universe")
    by_elem: dict[int, list[int]] = {}
    u = universe
    while u:
        e = (u & -u).bit_length() - 1
        u &= u - 1
        by_elem[e] = sorted((s for s in sets if s >> e & 1), key=lambda s: -bin(s).count("1"))

    def rec(unc: int, used: int):
        nonlocal best
        if unc == 0:
            best = min(best, used)
            return
        big = max(bin(s & unc).count("1") for s in sets)
        if used + -(-bin(unc).count("1") // big) >= best:
            return
        e_pick, opts = None, None
        u = unc
        while u:
            e = (u & -u).bit_length() - 1
            u &= u - 1
            if opts is None or len(by_elem[e]) < len(opts):
                e_pick, opts = e, by_elem[e]
        for s in opts:
            rec(unc & ~s, used + 1)

    rec(universe, 0)
    return best


def set_cover_greedy(sets: list[int], universe: int) -> int | None:
    unc, used = universe, 0
    while unc:
        s = max(sets, key=lambda s: bin(s & unc).count("1"), default=0)
        if s & unc == 0:
            return None
        unc &= ~s
        used += 1
    return used


def _cover_bracket(rel: np.ndarray, cutoff: int, upper: bool) -> tuple[int, bool] | None:
    """Minimum number of rows of ``rel`` (``rel[i, j]``: i covers j) whose
    union is every column.  None if some column is uncovered."""
    N = rel.shape[0]
    if not rel.any(axis=0).all():
        return None
    sym = rel | rel.T
    total, exact = 0, True
    for comp in components(sym):
        sub = rel[np.ix_(comp, comp)]
        if sub.all():
            total += 1
            continue
        sets = _bitsets(sub)
        universe = (1 << len(comp)) - 1
        if len(comp) <= cutoff:
            total += set_cover_exact(sets, universe)
        else:
            g = set_cover_greedy(sets, universe)
            if upper:
                total += g
            else:
                maxset = max(bin(s).count("1") for s in sets)
                total += max(1, math.ceil(g / (1 + math.log(maxset))))
            exact = False
    return total, exact


# --- the three count notions --------------------------------------------


def max_separated(points, ev: Evaluator, n: int, eps, *, exact_cutoff: int = EXACT_CUTOFF) -> CountBracket:
    """Largest ``(n, eps)``-separated set (pairwise ``d_n > eps``)."""
    pts, _ = _unpack(points)
    eps = Fraction(eps)
    if not pts:
        return CountBracket(0, 0, "exact")
    c = _class_count(pts, ev, n, eps, strict=False)
    if c is not None:
        return CountBracket(c, c, "exact")
    M = ev.matrix(pts, n)
    lo, lo_ex = independence_bracket(~M.lo_gt(eps), exact_cutoff, upper=False)
    hi, hi_ex = None, False
    if np.diag(M.hi_le(eps)).all():
        hi, hi_ex = independence_bracket(M.hi_le(eps), exact_cutoff, upper=True)
        hi = min(hi, len(pts))
    method = "branchBound" if lo_ex and hi_ex else "greedyBound"
    return CountBracket(lo, hi, method)


def min_spanning(points, ev: Evaluator, n: int, eps, *, exact_cutoff: int = EXACT_CUTOFF) -> CountBracket:
    """Smallest ``(n, eps)``-spanning set (every point within ``eps``)."""
    pts, grid = _unpack(points)
    eps = Fraction(eps)
    if not pts:
        return CountBracket(0, 0, "exact")
    c = _class_count(pts, ev, n, eps, strict=False)
    if c is not None:
        return CountBracket(c, c, "exact")
    if grid is not None and grid.density.hi > eps / 4:
        raise DensityTooCoarse(f"grid density {grid.density.hi} exceeds eps/4 = {eps / 4}")
    M = ev.matrix(pts, n)
    up = _cover_bracket(M.hi_le(eps), exact_cutoff, upper=True)
    if up is None:
        raise DensityTooCoarse("some cell is not certainly covered by any centre")
    low = _cover_bracket(M.lo_le(eps), exact_cutoff, upper=False)
    lo2 = max_separated(pts, ev, n, 2 * eps, exact_cutoff=exact_cutoff).lo
    lo = max(low[0], lo2)
    if lo > up[0]:
        raise AssertionError(f"spanning bracket crossed: {lo} > {up[0]}")
    method = "branchBound" if up[1] and low[1] and lo == up[0] else "greedyBound"
    return CountBracket(lo, up[0], method)


def diam_cover_count(points, ev: Evaluator, n: int, eps, *, exact_cutoff: int = EXACT_CUTOFF) -> CountBracket:
    """Fewest sets of ``d_n``-diameter ``< eps`` covering the points' cells."""
    pts, grid = _unpack(points)
    eps = Fraction(eps)
    if not pts:
        return CountBracket(0, 0, "exact")
    c = _class_count(pts, ev, n, eps, strict=True)
    if c is not None:
        return CountBracket(c, c, "exact")
    M = ev.matrix(pts, n)
    lo, lo_ex = independence_bracket(~M.lo_ge(eps), exact_cutoff, upper=False)
    his = []
    tight = M.hi_lt(eps)
    if np.diag(tight).all():
        his.append(len(clique_partition(tight)))
    if grid is not None:
        try:
            his.append(min_spanning(grid, ev, n, eps / 3, exact_cutoff=exact_cutoff).hi)
        except DensityTooCoarse:
            pass
    hi = min(his) if his else None
    if hi is not None and lo > hi:
        raise AssertionError(f"cover bracket crossed: {lo} > {hi}")
    return CountBracket(lo, hi, "exact" if hi == lo else "greedyBound")


def closed_form_count(ev: Evaluator, n: int, eps, strict: bool = False) -> CountBracket | None:
    """Class count of the whole space from the coordinate profile."""
    c = ev.class_count(n, Fraction(eps), strict)
    if c is None:
        return None
    return CountBracket(c, c, "closedForm")


# --- weighted fiber covers ---------------------------------------------


@dataclass(frozen=True)
class WeightedCoverQuery:
    factor: Any
    n: int
    eps: Fraction
    omega: Fraction

    def __post_init__(self):
        if not 0 <= Fraction(self.omega) <= 1:
            raise ValueError("omega must lie in [0, 1]")
        object.__setattr__(self, "eps", Fraction(self.eps))
        object.__setattr__(self, "omega", Fraction(self.omega))


@dataclass
class CoverSumReport:
    value: Interval
    method: str
    codomain_count: CountBracket
    fiber_counts: list = field(default_factory=list)


def _pow_lo(c: int, w) -> Fraction:
    return rational_power(c, w).lo


def _pow_hi(c: int, w) -> Fraction:
    return rational_power(c, w).hi


def weighted_cover_sum(query: WeightedCoverQuery, domain_grid, codomain_grid, *, beam: int = 4,
                       detail: bool = False):
    """Bracket of ``inf over covers {V_i} of Y (diam < eps) of
    sum_i #(pi^{-1} V_i, n, eps)**omega``."""
    f, n, eps, w = query.factor, max(1, query.n), query.eps, query.omega
    dom_ev = evaluator_for(f.domain)
    cod_ev = evaluator_for(f.codomain)
    dom_pts, _ = _unpack(domain_grid)
    cod_pts, _ = _unpack(codomain_grid)

    cod_count = diam_cover_count(codomain_grid, cod_ev, n, eps)
    lo = Fraction(cod_count.lo)
    hi = None
    method = "search"
    fibers_out = []

    groups = None
    if cod_ev.ultrametric:
        groups = {}
        for p in dom_pts:
            k = cod_ev.key(f.apply(p), n, eps, True)
            if k is None:
                groups = None
                break
            groups.setdefault(k, []).append(p)
    if groups is not None:
        s_lo = s_hi = Fraction(0)
        for k in sorted(groups, key=repr):
            fc = diam_cover_count(groups[k], dom_ev, n, eps)
            fibers_out.append(fc)
            s_lo += _pow_lo(fc.lo, w)
            s_hi += _pow_hi(fc.hi, w) if fc.hi is not None else math.inf
        if s_hi != math.inf:
            hi = s_hi
        # with an ultrametric codomain the class cover is optimal
        lo = max(lo, s_lo)
        method = "exact" if all(fc.exact for fc in fibers_out) else "classCover"
    else:
        hi = _search_covers(f, n, eps, w, dom_pts, cod_pts, dom_ev, cod_ev, beam)

    # structural floors
    fmin = _fiber_floor(f, n, eps, dom_pts)
    if fmin > 1:
        lo = max(lo, cod_count.lo * _pow_lo(fmin, w))
    if dom_ev.ultrametric or len(dom_pts) <= DOMAIN_FLOOR_LIMIT:
        dom_count = diam_cover_count(dom_pts, dom_ev, n, eps)
        lo = max(lo, _pow_lo(dom_count.lo, w))
    if hi is None:
        raise DensityTooCoarse("no certified cover of the codomain at this resolution")
    if lo > hi:
        raise AssertionError(f"inconsistent bracket {lo} > {hi}")
    val = Interval(lo, hi)
    if detail:
        return CoverSumReport(val, method, cod_count, fibers_out)
    return val


def closed_form_cover_sum(query: WeightedCoverQuery) -> Interval | None:
    """``#^omega`` from strict agreement profiles.

    When both sides have product-form classes and the codomain profile pulls
    back to domain coordinates, every codomain class has the same number of
    domain classes above it, so the sum is ``#Y * (fiber)**omega``.
    """
    f, n, eps, w = query.factor, max(1, query.n), query.eps, query.omega
    pull = getattr(f, "pull_profile", None)
    dom_ev, cod_ev = evaluator_for(f.domain), evaluator_for(f.codomain)
    if pull is None or not (dom_ev.ultrametric and cod_ev.ultrametric):
        return None
    pd = dom_ev._cached_profile(n, eps, True)
    pc = cod_ev._cached_profile(n, eps, True)
    if pd is None or pc is None:
        return None
    back = pull(pc)
    if back is None:
        return None
    # nested prefix cylinders: a finer codomain class meets one domain class
    fib = profile_count(f.domain, {a: max(0, d - back.get(a, 0)) for a, d in pd.items()})
    cy = profile_count(f.codomain, pc)
    pw = rational_power(fib, w)
    return Interval(cy * pw.lo, cy * pw.hi)


def _fiber_floor(f, n, eps, dom_pts) -> int:
    """Lower bound on ``#(pi^{-1} y)`` valid for every ``y``."""
    if isinstance(f, ProjectLeft):
        right = sorted({p.right for p in dom_pts}, key=repr)
        ev = evaluator_for(f.domain.right)
        return max(1, diam_cover_count(right, ev, n, eps).lo)
    return 1


def _search_covers(f, n, eps, w, dom_pts, cod_pts, dom_ev, cod_ev, beam) -> Fraction | None:
    M = cod_ev.matrix(cod_pts, n)
    tight = M.hi_lt(eps)
    if not np.diag(tight).all():
        return None
    cod = f.codomain
    images = [f.apply(p) for p in dom_pts]
    rng = np.random.default_rng(0)
    orders = [None, np.arange(len(cod_pts))]
    orders += [rng.permutation(len(cod_pts)) for _ in range(max(0, beam - 2))]
    best = None
    cache: dict = {}
    for order in orders:
        total = Fraction(0)
        for g in clique_partition(tight, order):
            key = tuple(sorted(g))
            if key not in cache:
                members = [cod_pts[i] for i in g]
                fib = [p for p, y in zip(dom_pts, images) if any(cod.meets(y, q) for q in members)]
                fc = diam_cover_count(fib, dom_ev, n, eps)
                cache[key] = None if fc.hi is None else _pow_hi(fc.hi, w)
            if cache[key] is None:
                total = None
                break
            total += cache[key]
        if total is not None and (best is None or total < best):
            best = total
    return best


# --- open covers by cylinders -------------------------------------------


@dataclass(frozen=True)
class CylinderCover:
    """Cover of a one-sided shift (patterns are prefixes) or of a product of
    two (patterns are ``Pair`` of prefixes) by cylinder sets."""

    system: Any
    elements: tuple
    diam: Interval
    leb: Interval

    @property
    def depth(self) -> int:
        if isinstance(self.system, Product):
            return max(max(len(e.left), len(e.right)) for e in self.elements)
        return max(len(e) for e in self.elements)


def _contains(system, pattern, cell) -> bool:
    if isinstance(system, Product):
        return _contains(system.left, pattern.left, cell.left) and _contains(
            system.right, pattern.right, cell.right
        )
    k = len(pattern)
    return len(cell) >= k and tuple(cell[:k]) == tuple(pattern)


def product_partition(system, a: int, b: int | None = None) -> CylinderCover:
    """All cylinders of depth ``a`` (and ``b`` on the right factor)."""
    def words(sys, d):
        return [tuple(w) for w in itertools.product(sys.alphabet.symbols, repeat=d)]

    def side(sys, d):
        bb = sys.metric.b
        dm = bb**d if d > 0 else mdiam(sys.metric)
        lb = bb ** (d - 1) if d > 0 else Fraction(2)
        return dm, lb

    if isinstance(system, Product):
        els = tuple(Pair(u, v) for u in words(system.left, a) for v in words(system.right, b))
        dl, ll = side(system.left, a)
        dr, lr = side(system.right, b)
        return CylinderCover(system, els, Interval.exact(max(dl, dr)), Interval.exact(min(ll, lr)))
    dm, lb = side(system, a)
    return CylinderCover(system, tuple(words(system, a)), Interval.exact(dm), Interval.exact(lb))


def _join_cells(cover: CylinderCover, n: int, extra: int = 0) -> list:
    r = max(1, cover.depth + extra)
    return cover.system.cells(n, r)


def _join_options(cover: CylinderCover, n: int, cells: list) -> list[list[tuple]]:
    sys = cover.system
    out = []
    for c in cells:
        per = []
        for j in range(n):
            sc = sys.shift(c, j)
            opts = [i for i, e in enumerate(cover.elements) if _contains(sys, e, sc)]
            if not opts:
                raise DensityTooCoarse("cell not inside any cover element")
            per.append(opts)
        out.append(per)
    return out


def _min_join_cover(opts: list[list[list[int]]], cutoff: int) -> tuple[int, bool]:
    """Fewest join elements (one cover index per step) containing all cells."""
    if all(len(o) == 1 for per in opts for o in per):
        return len({tuple(o[0] for o in per) for per in opts}), True
    cands = set()
    for per in opts:
        cands.update(itertools.product(*per))
    cands = sorted(cands)
    optsets = [[set(o) for o in per] for per in opts]
    sets = []
    for t in cands:
        bits = 0
        for i, per in enumerate(optsets):
            if all(t[j] in per[j] for j in range(len(t))):
                bits |= 1 << i
        sets.append(bits)
    universe = (1 << len(opts)) - 1
    if len(opts) <= 4 * cutoff:
        return set_cover_exact(sets, universe), True
    return set_cover_greedy(sets, universe), False


def join_cover_count(cover: CylinderCover, n: int, *, exact_cutoff: int = EXACT_CUTOFF,
                     cap: int | None = None) -> CountBracket:
    """``N(U^n)``: fewest elements of ``U v T^-1 U v ... v T^-(n-1) U``
    needed to cover the space."""
    n = max(1, n)
    cells = _join_cells(cover, n)
    if cap is not None and len(cells) > cap:
        raise TooLarge(len(cells), cap)
    opts = _join_options(cover, n, cells)
    v, ex = _min_join_cover(opts, exact_cutoff)
    if ex:
        return CountBracket(v, v, "exact")
    return CountBracket(1, v, "greedyBound")


def join_sandwich(cover: CylinderCover, n: int) -> tuple[CountBracket, CountBracket]:
    """``s(d_n, diam) <= N(U^n) <= r(d_n, leb/2)`` evaluated on the space."""
    ev = evaluator_for(cover.system)
    r = max(1, cover.depth)
    cells = cover.system.cells(n, r + 1)
    s = max_separated(cells, ev, n, cover.diam.hi)
    rr = min_spanning(cells, ev, n, cover.leb.lo / 2)
    return s, rr


def relative_count(U: CylinderCover, V: CylinderCover | None, factor, n: int, *,
                   exact_cutoff: int = EXACT_CUTOFF) -> CountBracket:
    """``N(U^n | V^n v pi) = max over V-join elements and fibers of the
    fewest U-join elements covering their intersection``; ``V=None`` is
    the trivial cover."""
    n = max(1, n)
    depth = max(U.depth, V.depth if V is not None else 0)
    cells = U.system.cells(n, max(1, depth))
    uopts = _join_options(U, n, cells)
    vopts = _join_options(V, n, cells) if V is not None else [[[0]] * n for _ in cells]
    buckets: dict = {}
    for c, uo, vo in zip(cells, uopts, vopts):
        q = factor.apply(c)
        for vt in itertools.product(*vo):
            buckets.setdefault((q, vt), []).append(uo)
    best, exact = 0, True
    for k in sorted(buckets, key=repr):
        v, ex = _min_join_cover(buckets[k], exact_cutoff)
        best = max(best, v)
        exact &= ex
    return CountBracket(best if exact else 1, best, "exact" if exact else "greedyBound")
