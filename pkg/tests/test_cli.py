from __future__ import annotations

import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from mdimlab.cli import COLUMNS, EXIT_CAP, EXIT_CONFIG, EXIT_OK, main
from mdimlab.scenarios import SCENARIOS


def write_config(tmp_path: Path, **over) -> Path:
    cfg = {
        "name": "tiny",
        "system": {"type": "one_sided", "m": 2, "b": "1/4"},
        "quantities": ["separated", "spanning", "closed_form"],
        "eps_grid": ["9/40", "9/160"],
        "nmax": 2,
    }
    cfg.update(over)
    p = tmp_path / "cfg.yaml"
    p.write_text(yaml.safe_dump(cfg))
    return p


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_list_scenarios(capsys):
    assert main(["list-scenarios"]) == EXIT_OK
    out = capsys.readouterr().out
    for name in SCENARIOS:
        assert name in out


def test_run_is_byte_identical_across_runs_and_threads(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["-q", "run", "ex4_7a", "--out", str(a)]) == EXIT_OK
    assert main(["-q", "run", "ex4_7a", "--out", str(b), "--threads", "2"]) == EXIT_OK
    for f in ("results.csv", "results.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_csv_layout(tmp_path):
    out = tmp_path / "o"
    assert main(["-q", "run", "thm4_18", "--out", str(out)]) == EXIT_OK
    raw = (out / "results.csv").read_bytes()
    assert b"\r\n" not in raw
    assert raw.decode().splitlines()[0] == ",".join(COLUMNS)
    rows = read_csv(out / "results.csv")
    assert rows and all(r["pass"] in ("true", "false", "") for r in rows)
    doc = json.loads((out / "results.json").read_text())
    assert doc["scenario"] == "thm4_18"


def test_unknown_scenario_exits_with_config_status(tmp_path, capsys):
    assert main(["run", "nope", "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert "unknown scenario" in capsys.readouterr().err
    assert not (tmp_path / "x").exists()


def test_estimate_writes_counts_and_slopes(tmp_path):
    out = tmp_path / "e"
    assert main(["-q", "estimate", "--config", str(write_config(tmp_path)), "--out", str(out)]) == EXIT_OK
    rows = read_csv(out / "results.csv")
    cf = {(r["n"], r["eps"]): r["lo"] for r in rows if r["quantity"] == "closed_form"}
    assert cf[("1", "9/40")] == "4" and cf[("2", "9/160")] == "16"
    sep = {(r["n"], r["eps"]): r for r in rows if r["quantity"] == "separated"}
    assert all(sep[k]["lo"] == v == sep[k]["hi"] for k, v in cf.items())
    slopes = json.loads((out / "results.json").read_text())["slopes"]
    assert "separated" in slopes and "fit" in slopes["separated"]


def test_single_scale_omits_the_slope_section(tmp_path):
    out = tmp_path / "e"
    cfg = write_config(tmp_path, eps_grid=["9/40"])
    assert main(["-q", "estimate", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    slopes = json.loads((out / "results.json").read_text())["slopes"]
    assert set(slopes) == {"omitted"} and "fewer than two" in slopes["omitted"]


def test_cap_overflow_exits_2_with_partial_results(tmp_path, capsys):
    out = tmp_path / "c"
    cfg = write_config(tmp_path, quantities=["separated"], eps_grid=["9/40", "9/10240"], nmax=3, cap=40)
    assert main(["-q", "estimate", "--config", str(cfg), "--out", str(out)]) == EXIT_CAP
    assert "cap exceeded" in capsys.readouterr().err
    doc = json.loads((out / "results.json").read_text())
    assert "cap_exceeded" in doc
    assert (out / "results.csv").exists()


@pytest.mark.parametrize(
    "over",
    [
        {"nmax": 0},
        {"eps_grid": ["0.1"]},
        {"system": {"type": "torus"}},
        {"quantities": ["cover_sum"]},
        {"omegas": ["3/2"], "quantities": ["cover_sum"],
         "factor": {"type": "project_left", "other": {"type": "one_sided", "m": 2, "b": "1/4"}}},
        {"bogus": 1},
    ],
)
def test_invalid_configs_exit_3(tmp_path, over, capsys):
    cfg = write_config(tmp_path, **over)
    assert main(["estimate", "--config", str(cfg), "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert capsys.readouterr().err.strip()


def test_unreadable_yaml_exits_3(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("name: [unclosed\n")
    assert main(["estimate", "--config", str(p)]) == EXIT_CONFIG


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mdimlab.cli", "list-scenarios"], capture_output=True, text=True)
    assert proc.returncode == 0 and "ex2_3" in proc.stdout
