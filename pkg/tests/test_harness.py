import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from viscofree.harness import (DEFAULTS, ITERATION_COLUMNS, SCENARIOS, TIMESERIES_COLUMNS,
                               ConfigError, main, parse_config, read_snapshot, write_snapshot)

ROOT = Path(__file__).resolve().parents[1]


def test_defaults_parse():
    cfg = parse_config("")
    assert cfg.scenario == "relaxing_bump" and cfg.nt == 10
    assert cfg.physical is None
    assert cfg.settings.tol == 1e-8


@pytest.mark.parametrize("text,line", [
    ("[run]\nscenario = relaxing_bump\n\n[bogus]\nx = 1\n", 4),
    ("[grid]\nnx = 16\nnzz = 9\n", 3),
    ("[grid]\nnx = sixteen\n", 2),
    ("[solver]\n\ntol = -1e-8\n", 3),
    ("[solver]\ntol = 0\n", 2),
    ("[run]\nscenario = nowhere\n", 2),
    ("[dimensionless]\nRe = 1\n[physical]\nrho = 1\n", 3),
    ("[law]\n# comment\nkind = maxwellian\n", 3),
    ("[time]\nT = nan\n", 2),
])
def test_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as e:
        parse_config(text)
    assert e.value.line == line
    assert f"line {line}" in str(e.value)


def test_syntax_error_line():
    with pytest.raises(ConfigError) as e:
        parse_config("[run]\nscenario = equilibrium\nthis line has no separator\n")
    assert e.value.line == 3


def test_overrides_and_flags():
    cfg = parse_config("[grid]\nnx = 16\n", ["grid.nx=32", "dimensionless.We=0.25",
                                              "solver.auto_halve=false"], "manufactured", 7)
    assert cfg.nx == 32 and cfg.params.We == 0.25 and not cfg.settings.auto_halve
    assert cfg.scenario == "manufactured" and cfg.seed == 7
    with pytest.raises(ConfigError):
        parse_config("", ["grid.nq=3"])
    with pytest.raises(ConfigError):
        parse_config("", ["nx=3"])


def test_physical_block_replaces_dimensionless():
    cfg = parse_config((ROOT / "configs" / "physical_giesekus.ini").read_text())
    assert cfg.physical is not None and cfg.law["kind"] == "giesekus"
    assert cfg.params.eps == pytest.approx(0.5)
    assert "dimensionless" not in cfg.resolved.sections()


def test_resolved_config_materializes_everything():
    cfg = parse_config("[grid]\nnx = 12\n")
    for sec, vals in DEFAULTS.items():
        if sec == "physical":
            continue
        assert set(cfg.resolved[sec]) == set(vals)
    assert cfg.resolved["grid"]["nx"] == "12"


def test_snapshot_round_trip(tmp_path):
    a = np.random.default_rng(0).normal(size=(2, 5, 7))
    p = tmp_path / "u.bin"
    write_snapshot(p, "u", a, 0.125)
    meta, b = read_snapshot(p)
    assert np.array_equal(a, b)
    assert meta["field"] == "u" and meta["dims"] == "2 5 7" and float(meta["dt"]) == 0.125
    assert meta["byteorder"] == "little" and meta["dtype"] == "float64"
    assert p.stat().st_size == len(p.read_bytes().split(b"END\n", 1)[0]) + 4 + a.size * 8


def run_cli(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main(["run", *args, "--out", str(out)])
    return code, out


def test_equilibrium_scenario(tmp_path):
    code, out = run_cli(tmp_path, "-", "--scenario", "equilibrium", "--override", "time.windows=2")
    assert code == 0
    lines = (out / "timeseries.csv").read_text().splitlines()
    assert lines[0].split(",") == TIMESERIES_COLUMNS
    rows = [dict(zip(TIMESERIES_COLUMNS, l.split(","))) for l in lines[1:]]
    assert len(rows) == 20
    for r in rows:
        for k in ("surface_amplitude", "u_l2", "q_l2", "sigma_sup", "phi_max"):
            assert float(r[k]) == 0.0
    assert (out / "iterations.csv").read_text().splitlines()[0].split(",") == ITERATION_COLUMNS
    rep = json.loads((out / "report.json").read_text())
    assert rep["passed"] and rep["checks"]["equilibrium_preserved"]["passed"]
    assert (out / "resolved_config.ini").exists() and (out / "plot_timeseries.py").exists()
    meta, eta = read_snapshot(out / "snapshots" / "eta_w001.bin")
    assert eta.shape == (2, 9, 16) and np.all(eta == 0)


def test_rerun_is_byte_identical(tmp_path):
    args = ("-", "--scenario", "relaxing_bump", "--override", "time.windows=2")
    _, a = run_cli(tmp_path, *args, name="a")
    _, b = run_cli(tmp_path, *args, name="b")
    for f in ("timeseries.csv", "iterations.csv", "resolved_config.ini"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_manufactured_scenario(tmp_path):
    code, out = run_cli(tmp_path, "-", "--scenario", "manufactured")
    rep = json.loads((out / "report.json").read_text())
    assert code == 0 and min(rep["orders"]) >= 1.0
    assert rep["checks"]["traction_residual_finest"]["value"] <= 1e-8


def test_lemma_suite_scenario(tmp_path):
    code, out = run_cli(tmp_path, "-", "--scenario", "lemma_suite")
    rep = json.loads((out / "report.json").read_text())
    assert code == 0
    first = next(iter(rep["samples"].values()))
    assert set(first) == {"a", "b", "c", "d", "integral"}
    assert "growth" in rep["checks"]["negative_control"]["detail"]


def test_constitutive_sweep_scenario(tmp_path):
    code, out = run_cli(tmp_path, "-", "--scenario", "constitutive_sweep", "--override",
                        "diagnostics.sweep_laws=giesekus,ptt_linear", "--override", "time.T=0.1")
    rep = json.loads((out / "report.json").read_text())
    assert code == 0 and set(rep["laws"]) == {"giesekus", "ptt_linear"}
    assert "bound_condition" in rep["laws"]["giesekus"]
    assert (out / "giesekus" / "timeseries.csv").exists()


def test_bad_config_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.ini"
    p.write_text("[grid]\nnx = 16\nwidth = 3\n")
    assert main(["run", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "line 3" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.ini")]) == 2


def test_scenario_failure_exit_code(tmp_path, capsys):
    code, _ = run_cli(tmp_path, "-", "--override", "solver.solver=cg")
    assert code == 3
    assert "relaxing_bump" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "viscofree", "run", "-", "--scenario", "equilibrium",
                        "--override", "time.windows=1", "--out", str(tmp_path / "m")],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert "PASS equilibrium_preserved" in r.stdout


def test_scenarios_listed():
    assert set(SCENARIOS) == {"equilibrium", "relaxing_bump", "manufactured", "lemma_suite",
                              "constitutive_sweep"}
