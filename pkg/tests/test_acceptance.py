"""Acceptance criteria, one test each.

Every test prints a single ``criterion N: PASS|FAIL`` line with its runtime.
Run ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from mdimlab.counting import (
    _bitsets,
    max_separated,
    min_spanning,
    set_cover_exact,
    set_cover_greedy,
)
from mdimlab.metrics import evaluator_for
from mdimlab.scenarios import SCENARIOS
from mdimlab.symbolic import FiniteSpace, build_grid

pytestmark = pytest.mark.acceptance

_CAPSYS = None


@pytest.fixture(autouse=True)
def _uncaptured(capsys):
    global _CAPSYS
    _CAPSYS = capsys
    yield
    _CAPSYS = None


def report(k: int, ok: bool, detail: str, secs: float, limit: float) -> None:
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'} ({detail}; {secs:.1f}s of {limit:.0f}s)"
    if _CAPSYS is None:
        print(line)
        return
    with _CAPSYS.disabled():
        print("\n" + line, flush=True)


def run_cells(name: str, only=None):
    rows = []
    for cell in SCENARIOS[name].cells():
        if only is None or cell.name in only or any(cell.name.startswith(o) for o in only):
            rows.extend(cell.run())
    return rows


def check_rows(k, rows, limit, t0, quantities=None):
    secs = time.perf_counter() - t0
    picked = [r for r in rows if r.passed is not None and (quantities is None or r.quantity in quantities)]
    bad = [r for r in picked if not r.passed]
    ok = bool(picked) and not bad and secs < limit
    report(k, ok, f"{len(picked) - len(bad)}/{len(picked)} rows", secs, limit)
    assert picked, "no acceptance rows produced"
    assert not bad, [(r.quantity, r.n, r.eps, r.omega, r.lo, r.hi, r.target) for r in bad]
    assert secs < limit


def test_criterion_1_box_dimension():
    t0 = time.perf_counter()
    rows = run_cells("ex2_3", only=["counts", "slope"])
    slope = [r for r in rows if r.quantity == "box_dimension"]
    assert len(slope) == 1 and 0.48 <= slope[0].slope <= 0.52
    set_cover = [r for r in rows if r.quantity == "ball_count_set_cover"]
    assert len(set_cover) == 2
    check_rows(1, rows, 10, t0)


def test_criterion_2_binomial_identity():
    t0 = time.perf_counter()
    rows = run_cells("ex5_4", only=["identity"])
    assert [r.n for r in rows] == list(range(1, 21))
    check_rows(2, rows, 1, t0)


def test_criterion_3_product_cover_sums():
    t0 = time.perf_counter()
    rows = run_cells("ex4_7a")
    assert len([r for r in rows if r.quantity == "cover_sum"]) == 2 * 3 * 3
    check_rows(3, rows, 60, t0, {"cover_sum"})


def test_criterion_4_relative_chain():
    t0 = time.perf_counter()
    rows = run_cells("thm4_18")
    check_rows(4, rows, 30, t0)


def test_criterion_5_cover_sum_vs_joins():
    t0 = time.perf_counter()
    rows = run_cells("thm4_8")
    assert len(rows) == 2 * 3 * 3
    check_rows(5, rows, 60, t0)


def test_criterion_6_noise_invariance():
    t0 = time.perf_counter()
    rows = run_cells("ex5_3")
    check_rows(6, rows, 30, t0, {"noise_mismatches"})


def test_criterion_7_skew_inequalities():
    t0 = time.perf_counter()
    rows = run_cells("thm5_6")
    assert len([r for r in rows if r.quantity == "skew_separated"]) == 8
    check_rows(7, rows, 120, t0, {"skew_separated", "skew_spanning"})


def test_criterion_8_endpoint_ratio():
    t0 = time.perf_counter()
    rows = run_cells("ex5_4", only=["endpoints"])
    check_rows(8, rows, 120, t0)


# --- criterion 9: solvers against exhaustive oracles -------------------------


def _random_table(rng, kind: str, N: int):
    if kind == "ultra":
        depth = int(rng.integers(2, 6))
        words = rng.integers(0, 2, size=(N, depth))
        b = Fraction(1, int(rng.integers(2, 5)))

        def d(i, j):
            diff = np.flatnonzero(words[i] != words[j])
            return b ** int(diff[0]) if diff.size else Fraction(0)

    elif kind == "l1":
        pts = rng.integers(0, 6, size=(N, 2))

        def d(i, j):
            return Fraction(int(np.abs(pts[i] - pts[j]).sum()), 4)

    else:  # summed windows with weights 2^-|k|
        win = rng.integers(0, 2, size=(N, 5))
        w = [Fraction(1, 2 ** abs(k - 2)) for k in range(5)]

        def d(i, j):
            return sum((w[k] for k in range(5) if win[i, k] != win[j, k]), Fraction(0))

    return tuple(tuple(d(i, j) for j in range(N)) for i in range(N))


def _masks(N):
    return np.arange(1 << N, dtype=np.int64)


def oracle_separated(table, eps) -> int:
    N = len(table)
    m = _masks(N)
    ok = np.ones(m.size, dtype=bool)
    for i in range(N):
        for j in range(i + 1, N):
            if not table[i][j] > eps:
                ok &= ~(((m >> i) & 1).astype(bool) & ((m >> j) & 1).astype(bool))
    pop = np.array([bin(int(x)).count("1") for x in m[ok]])
    return int(pop.max())


def oracle_spanning(table, eps) -> int:
    N = len(table)
    m = _masks(N)
    cover = np.zeros(m.size, dtype=np.int64)
    for i in range(N):
        ball = sum(1 << j for j in range(N) if table[i][j] <= eps)
        cover |= np.where((m >> i) & 1, ball, 0)
    full = (1 << N) - 1
    pop = np.array([bin(int(x)).count("1") for x in m[cover == full]])
    return int(pop.min())


def test_criterion_9_solver_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    failures = []
    for inst in range(200):
        kind = ("ultra", "l1", "summed")[inst % 3]
        N = int(rng.integers(3, 19))
        table = _random_table(rng, kind, N)
        vals = sorted({v for row in table for v in row if v > 0})
        eps = vals[int(rng.integers(0, len(vals)))] if vals else Fraction(1)
        if rng.random() < 0.5 and len(vals) > 1:
            eps = (eps + vals[0]) / 2
        space = FiniteSpace(table)
        ev = evaluator_for(space)
        grid = build_grid(space, 1)
        s = max_separated(grid, ev, 1, eps)
        s2 = max_separated(grid, ev, 1, 2 * eps)
        r = min_spanning(grid, ev, 1, eps)
        os_, or_ = oracle_separated(table, eps), oracle_spanning(table, eps)
        if not (s.lo == s.hi == os_):
            failures.append((inst, "separated", s, os_))
        if not (r.lo == r.hi == or_):
            failures.append((inst, "spanning", r, or_))
        if not (s2.hi <= r.lo and r.hi <= s.lo):
            failures.append((inst, "sandwich", s2, r, s))
        balls = _bitsets(np.array([[table[i][j] <= eps for j in range(N)] for i in range(N)]))
        g = set_cover_greedy(balls, (1 << N) - 1)
        ex = set_cover_exact(balls, (1 << N) - 1)
        if not (ex == or_ and g <= ex * (1 + math.log(N))):
            failures.append((inst, "greedy", g, ex))
    secs = time.perf_counter() - t0
    ok = not failures and secs < 60
    report(9, ok, f"{200 - len({f[0] for f in failures})}/200 instances", secs, 60)
    assert not failures, failures[:5]
    assert secs < 60


def test_criterion_10_identity_slopes():
    t0 = time.perf_counter()
    rows = run_cells("rem3_13", only=["slope"]) + run_cells("rem3_19", only=["slope"])
    slopes = [r for r in rows if r.quantity in ("cover_sum_mdim", "weighted_capacity_mdim")]
    assert len(slopes) == 2
    for r in slopes:
        assert r.lo <= Fraction(1, 2) <= r.hi and not r.lo <= Fraction(5, 12) <= r.hi
        assert (r.hi - r.lo) / 2 <= Fraction(6, 100)
    check_rows(10, rows, 600, t0, {"cover_sum_mdim", "weighted_capacity_mdim"})


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
