"""Command line entry point ``mdim``.

Exit codes: 0 when every acceptance row passes, 1 when some row fails,
2 when an enumeration cap is exceeded (rows finished so far are still
written), 3 on a configuration error or an unknown scenario.
"""

from __future__ import annotations

import argparse
import concurrent.futures as cf
import csv
import io
import json
import logging
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any

import jsonschema
import yaml

from .counting import (
    DensityTooCoarse,
    WeightedCoverQuery,
    closed_form_count,
    diam_cover_count,
    max_separated,
    min_spanning,
    weighted_cover_sum,
)
from .estimators import EpsEntropy, InsufficientScales, RateCurve, growth_rate, mdim_slope
from .exactnum import Interval, fmt, log_fraction_bracket, scalar
from .metrics import Norm1DBi, SupBi, UltraShift, evaluator_for
from .random import DrivingSpec, PowerOfShift, expected_rate
from .scenarios import SCENARIOS, Cell, ResultRow
from .symbolic import (
    Alphabet,
    BiShift,
    IdentityRemetrized,
    NaturalExtension,
    OneSidedShift,
    Product,
    ProjectLeft,
    TooLarge,
    build_grid,
)

log = logging.getLogger("mdim")

EXIT_OK, EXIT_FAIL, EXIT_CAP, EXIT_CONFIG = 0, 1, 2, 3

COLUMNS = ("scenario", "quantity", "n", "eps", "omega", "lo", "hi", "method", "slope", "reference", "target", "pass")

_RATIONAL = {"type": "string", "pattern": r"^\s*\d+\s*(/\s*\d+\s*)?$"}
_SYSTEM = {
    "type": "object",
    "required": ["type"],
    "additionalProperties": False,
    "properties": {
        "type": {"enum": ["one_sided", "two_sided", "lift", "l1_bishift", "natural_extension"]},
        "m": {"type": "integer", "minimum": 1},
        "b": _RATIONAL,
    },
}
CONFIG_SCHEMA = {
    "type": "object",
    "required": ["name", "system", "eps_grid", "nmax"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "pattern": r"^[A-Za-z0-9_.-]+$"},
        "system": _SYSTEM,
        "quantities": {
            "type": "array",
            "items": {"enum": ["separated", "spanning", "cover", "closed_form", "cover_sum", "expected_rate"]},
            "minItems": 1,
        },
        "eps_grid": {"type": "array", "items": _RATIONAL, "minItems": 1},
        "nmax": {"type": "integer", "minimum": 1},
        "resolution": {"type": "integer", "minimum": 0},
        "cap": {"type": "integer", "minimum": 1},
        "exact_cutoff": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "factor": {
            "type": "object",
            "required": ["type", "other"],
            "additionalProperties": False,
            "properties": {"type": {"enum": ["project_left", "identity"]}, "other": _SYSTEM},
        },
        "omegas": {"type": "array", "items": _RATIONAL, "minItems": 1},
        "driving": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"p1": _RATIONAL, "mode": {"enum": ["exact", "montecarlo"]},
                           "samples": {"type": "integer", "minimum": 2}},
        },
        "out": {"type": "string"},
    },
}


class ConfigError(ValueError):
    pass


# --- output ------------------------------------------------------------------


def _cell(v: Any, direction: int = 0) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.6f}"
    if isinstance(v, (int, Fraction)):
        return fmt(v, direction)
    return str(v)


def row_record(r: ResultRow) -> dict:
    return {
        "scenario": r.scenario,
        "quantity": r.quantity,
        "n": _cell(r.n),
        "eps": _cell(r.eps),
        "omega": _cell(r.omega),
        "lo": _cell(r.lo, -1),
        "hi": "inf" if r.hi is None and r.lo is not None else _cell(r.hi, 1),
        "method": r.method,
        "slope": _cell(r.slope),
        "reference": r.reference,
        "target": r.target,
        "pass": "" if r.passed is None else _cell(r.passed),
    }


def write_results(out: Path, rows: list[ResultRow], extra: dict | None = None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    rows = sorted(rows, key=ResultRow.sort_key)
    recs = [row_record(r) for r in rows]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(recs)
    (out / "results.csv").write_text(buf.getvalue(), encoding="utf-8", newline="")
    doc = {"rows": recs}
    if extra:
        doc.update(extra)
    (out / "results.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8",
                                      newline="")


# --- running cells ------------------------------------------------------------


@dataclass
class RunOutcome:
    rows: list
    cap_error: str | None = None


def run_cells(cells: list[Cell], threads: int = 1) -> RunOutcome:
    """Run cells on a pool; a cap overflow stops new work but keeps finished rows."""
    rows: list[ResultRow] = []
    cap_error = None

    def timed(c: Cell):
        t = time.perf_counter()
        try:
            return c.run()
        finally:
            log.info("cell %s: %.3fs", c.name, time.perf_counter() - t)

    with cf.ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        futs = {pool.submit(timed, c): c for c in cells}
        for fut in cf.as_completed(futs):
            if fut.cancelled():
                continue
            try:
                rows.extend(fut.result())
            except TooLarge as e:
                cap_error = f"{futs[fut].name}: {e}"
                for other in futs:
                    other.cancel()
    return RunOutcome(rows, cap_error)


def exit_status(outcome: RunOutcome) -> int:
    if outcome.cap_error is not None:
        return EXIT_CAP
    return EXIT_FAIL if any(r.passed is False for r in outcome.rows) else EXIT_OK


# --- estimate configs ---------------------------------------------------------


def load_config(path: Path) -> dict:
    try:
        cfg = yaml.safe_load(path.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read config: {e}") from e
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        raise ConfigError(f"invalid config: {e.message}") from e
    return cfg


def _rational(s: str) -> Fraction:
    return scalar(s.replace(" ", ""))


def build_system(spec: dict):
    kind, m = spec["type"], spec.get("m", 2)
    b = _rational(spec.get("b", "1/2"))
    if kind in ("one_sided", "natural_extension", "lift", "two_sided") and not 0 < b < 1:
        raise ConfigError("b must lie strictly between 0 and 1")
    if kind == "one_sided":
        return OneSidedShift(Alphabet(m), UltraShift(b))
    if kind == "two_sided":
        return BiShift(Alphabet(m), UltraShift(b, "two"))
    if kind == "lift":
        return BiShift(OneSidedShift(Alphabet(m), UltraShift(b)), SupBi(UltraShift(b)))
    if kind == "l1_bishift":
        return BiShift(Alphabet(m), Norm1DBi(m))
    return NaturalExtension(OneSidedShift(Alphabet(m), UltraShift(b)))


def estimate_cells(cfg: dict) -> tuple[list[Cell], dict]:
    name = cfg["name"]
    system = build_system(cfg["system"])
    eps_grid = sorted({_rational(e) for e in cfg["eps_grid"]}, reverse=True)
    if any(e <= 0 for e in eps_grid):
        raise ConfigError("scales must be positive")
    nmax = cfg["nmax"]
    quantities = cfg.get("quantities", ["separated", "spanning"])
    cap = cfg.get("cap")
    res = cfg.get("resolution")
    cutoff = cfg.get("exact_cutoff", 24)
    ev = evaluator_for(system)
    factor = None
    if "cover_sum" in quantities:
        fspec = cfg.get("factor")
        if fspec is None:
            raise ConfigError("cover_sum needs a factor")
        other = build_system(fspec["other"])
        if fspec["type"] == "project_left":
            factor = ProjectLeft(Product(system, other))
        else:
            try:
                factor = IdentityRemetrized(system, other)
            except TypeError as e:
                raise ConfigError(str(e)) from e
    omegas = [_rational(w) for w in cfg.get("omegas", ["1/2"])]
    if any(w > 1 for w in omegas):
        raise ConfigError("omega must lie in [0, 1]")
    drv = cfg.get("driving", {})
    if "expected_rate" in quantities and not isinstance(system, OneSidedShift | BiShift):
        raise ConfigError("expected_rate needs a shift fiber")

    def grid(sysm, n, eps):
        return build_grid(sysm, n, eps, cap=cap, resolution=res)

    def cell(qty, n, eps):
        def run():
            try:
                return compute(qty, n, eps)
            except DensityTooCoarse as e:
                return [ResultRow(name, qty, n=n, eps=eps, method="tooCoarse", target=str(e))]

        return run

    def compute(qty, n, eps):
        base = dict(n=n, eps=eps)
        if qty == "separated":
            c = max_separated(grid(system, n, eps), ev, n, eps, exact_cutoff=cutoff)
        elif qty == "spanning":
            c = min_spanning(grid(system, n, eps), ev, n, eps, exact_cutoff=cutoff)
        elif qty == "cover":
            c = diam_cover_count(grid(system, n, eps), ev, n, eps, exact_cutoff=cutoff)
        elif qty == "closed_form":
            c = closed_form_count(ev, n, eps)
            if c is None:
                return [ResultRow(name, qty, method="unavailable", target="no product-form classes", **base)]
        elif qty == "expected_rate":
            drive = DrivingSpec(_rational(drv.get("p1", "1/2")))
            v = expected_rate(PowerOfShift(), drive, n, eps, system, mode=drv.get("mode", "exact"),
                              seed=cfg.get("seed", 0), samples=drv.get("samples", 512))
            return [ResultRow(name, qty, lo=v.lo, hi=v.hi, method=drv.get("mode", "exact"), **base)]
        else:
            dg, cgd = grid(factor.domain, n, eps), grid(factor.codomain, n, eps)
            out = []
            for w in omegas:
                v = weighted_cover_sum(WeightedCoverQuery(factor, n, eps, w), dg, cgd)
                out.append(ResultRow(name, qty, omega=w, lo=v.lo, hi=v.hi, method="coverSum", **base))
            return out
        return [ResultRow(name, qty, lo=Fraction(c.lo), hi=None if c.hi is None else Fraction(c.hi),
                          method=c.method, **base)]

    cells = [
        Cell(f"{q} n={n} eps={fmt(e)}", cell(q, n, e))
        for q in quantities
        for e in eps_grid
        for n in range(1, nmax + 1)
    ]
    return cells, {"quantities": quantities, "eps_grid": eps_grid, "nmax": nmax}


def slope_section(rows: list[ResultRow], meta: dict) -> dict:
    """Per-quantity scale slopes from the finished count rows."""
    if len(meta["eps_grid"]) < 2:
        return {"omitted": "the scale grid has fewer than two entries"}
    out = {}
    for q in meta["quantities"]:
        if q in ("expected_rate",):
            continue
        for w in sorted({r.omega for r in rows if r.quantity == q}, key=lambda x: (x is not None, x or 0)):
            ents = []
            for e in meta["eps_grid"]:
                pts = sorted((r.n, r) for r in rows
                             if r.quantity == q and r.eps == e and r.omega == w and r.lo is not None)
                if not pts or any(r.hi is None for _, r in pts) or any(r.lo < 1 for _, r in pts):
                    continue
                curve = RateCurve(tuple((n, log_fraction_bracket(Interval(r.lo, r.hi))) for n, r in pts))
                ents.append(EpsEntropy(e, growth_rate(curve)))
            key = q if w is None else f"{q}@omega={fmt(w)}"
            try:
                est = mdim_slope(ents)
            except InsufficientScales as e:
                out[key] = {"omitted": str(e)}
                continue
            out[key] = {
                "fit": f"{est.slope:.6f}",
                "secant_lo": fmt(est.secant.lo, -1),
                "secant_hi": fmt(est.secant.hi, 1),
                "rates": {fmt(x.eps): [fmt(x.h.lo, -1), fmt(x.h.hi, 1)] for x in ents},
            }
    return out


# --- commands -----------------------------------------------------------------


def cmd_list(args) -> int:
    for name in sorted(SCENARIOS):
        s = SCENARIOS[name]
        line = f"{name:10s} {s.summary}"
        if s.notes:
            line += f" [{s.notes}]"
        print(line)
    return EXIT_OK


def cmd_run(args) -> int:
    scn = SCENARIOS.get(args.scenario)
    if scn is None:
        print(f"unknown scenario {args.scenario!r}; see 'mdim list-scenarios'", file=sys.stderr)
        return EXIT_CONFIG
    outcome = run_cells(scn.cells(), args.threads)
    out = Path(args.out or f"results/{scn.name}")
    extra = {"scenario": scn.name, "notes": scn.notes}
    if outcome.cap_error:
        extra["cap_exceeded"] = outcome.cap_error
    write_results(out, outcome.rows, extra)
    return _report(outcome, out)


def cmd_estimate(args) -> int:
    try:
        cfg = load_config(Path(args.config))
        cells, meta = estimate_cells(cfg)
    except (ConfigError, ValueError) as e:
        print(str(e), file=sys.stderr)
        return EXIT_CONFIG
    outcome = run_cells(cells, args.threads)
    out = Path(args.out or cfg.get("out") or f"results/{cfg['name']}")
    extra = {"config": cfg["name"], "slopes": slope_section(outcome.rows, meta)}
    if outcome.cap_error:
        extra["cap_exceeded"] = outcome.cap_error
    write_results(out, outcome.rows, extra)
    return _report(outcome, out)


def _report(outcome: RunOutcome, out: Path) -> int:
    status = exit_status(outcome)
    if outcome.cap_error:
        print(f"cap exceeded ({outcome.cap_error}); partial results in {out}", file=sys.stderr)
    failed = [r for r in outcome.rows if r.passed is False]
    for r in sorted(failed, key=ResultRow.sort_key):
        print(f"FAIL {r.scenario} {r.quantity} n={_cell(r.n)} eps={_cell(r.eps)} omega={_cell(r.omega)}",
              file=sys.stderr)
    checked = sum(r.passed is not None for r in outcome.rows)
    print(f"{len(outcome.rows)} rows, {checked - len(failed)}/{checked} checks passed -> {out}")
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mdim", description="Finite-scale mean dimension experiments.")
    p.add_argument("-q", "--quiet", action="store_true", help="do not log per-cell runtimes")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a preset scenario")
    r.add_argument("scenario")
    r.add_argument("--out", help="output directory (default results/<scenario>)")
    r.add_argument("--threads", type=int, default=1)
    r.set_defaults(func=cmd_run)
    e = sub.add_parser("estimate", help="run a YAML experiment config")
    e.add_argument("--config", required=True)
    e.add_argument("--out")
    e.add_argument("--threads", type=int, default=1)
    e.set_defaults(func=cmd_estimate)
    ls = sub.add_parser("list-scenarios", help="list preset scenarios")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s",
                        stream=sys.stderr)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
