import csv
import json
import subprocess
import sys

import pytest

from mapgenus.cli import ConfigError, RunConfig, potential_from_json, run

pytestmark = pytest.mark.filterwarnings("ignore:degree .* exceeds")


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


@pytest.fixture
def quartic(tmp_path):
    return write(tmp_path, "quartic.json", {"m": 1, "terms": ["1111"]})


def test_enumerate_closed(tmp_path, quartic):
    out = str(tmp_path / "e.csv")
    assert run(["enumerate", "--potential", quartic, "--gmax", "1", "--kmax", "2", "--out", out]) == 0
    table = rows(out)
    assert table[0] == ["genus", "k", "count"]
    got = {(r[0], r[1]): int(r[2]) for r in table[1:]}
    assert got[("0", "(1)")] == 2 and got[("1", "(1)")] == 1


def test_enumerate_rooted_and_pairings(tmp_path):
    V = write(tmp_path, "v.json", {"m": 2, "terms": ["1212"]})
    out, pj = str(tmp_path / "e.csv"), str(tmp_path / "p.json")
    assert run(["enumerate", "--potential", V, "--root", "1212", "--gmax", "1", "--kmax", "1",
                "--out", out, "--pairings", pj]) == 0
    got = {(r[0], r[1]): int(r[2]) for r in rows(out)[1:]}
    assert got[("1", "(1)")] == 6
    assert isinstance(json.load(open(pj)), (list, dict))


def test_enumerate_budget_exit(tmp_path, quartic, capsys):
    code = run(["enumerate", "--potential", quartic, "--kmax", "6", "--gmax", "3", "--budget", "10"])
    assert code == 1
    assert capsys.readouterr().err


def test_solve_single_word_csv(tmp_path, quartic):
    out = str(tmp_path / "s.csv")
    assert run(["solve", "--potential", quartic, "--K", "3", "--gmax", "1", "--word", "11",
                "--format", "csv", "--out", out]) == 0
    table = rows(out)
    assert table[0] == ["genus", "k", "coefficient"]
    got = {(r[0], r[1]): r[2] for r in table[1:]}
    assert got[("0", "(0)")] == "1" and got[("0", "(1)")] == "-8"


def test_solve_json(tmp_path, quartic):
    out = str(tmp_path / "s.json")
    assert run(["solve", "--potential", quartic, "--K", "2", "--gmax", "1", "--lmax", "2", "--out", out]) == 0
    doc = json.load(open(out))
    assert doc["m"] == 1 and doc["monomials"] == ["1111"] and doc["K"] == 2
    entries = doc["entries"]
    assert {e["ell"] for e in entries} == {1, 2}
    assert all(e["genus"] >= 1 for e in entries if e["ell"] == 2)


def test_free_energy(tmp_path, quartic):
    out = str(tmp_path / "f.csv")
    assert run(["free-energy", "--potential", quartic, "--K", "2", "--gmax", "1", "--out", out]) == 0
    got = {(r[0], r[1]): r[2] for r in rows(out)[1:]}
    assert got[("0", "(1)")] == "-2" and got[("1", "(1)")] == "-1"


def test_check_suites_pass(capsys):
    assert run(["check", "--suite", "oracle", "--order", "2"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines and all(l.startswith("PASS") for l in lines)
    assert run(["check", "--suite", "quadrature"]) == 0


def test_check_failure_exit(monkeypatch, capsys):
    from mapgenus import cli
    monkeypatch.setitem(cli.SUITES, "oracle", lambda order: iter([("forced", False)]))
    assert run(["check", "--suite", "oracle"]) == 2
    assert "FAIL" in capsys.readouterr().out


SIM = {"m": 1, "N": [2, 3, 4], "potential": [["1/20", "1111"]], "seed": 7, "steps": 400,
       "burn_in": 200, "chains": 2, "observables": ["11"]}


def test_simulate_deterministic(tmp_path):
    cfg = write(tmp_path, "sim.json", SIM)
    a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    rep = str(tmp_path / "r.json")
    assert run(["simulate", "--config", cfg, "--out", a, "--report", rep, "--solve-K", "6"]) == 0
    assert run(["simulate", "--config", cfg, "--out", b]) == 0
    assert open(a).read() == open(b).read()
    table = rows(a)
    assert table[0] == ["N", "observable", "mean", "stderr"] and len(table) == 4
    report = json.load(open(rep))
    assert set(report[0]) >= {"observable", "prediction", "fit", "agree_3se"}


def test_simulate_requires_seed(tmp_path, capsys):
    cfg = write(tmp_path, "sim.json", {k: v for k, v in SIM.items() if k != "seed"})
    assert run(["simulate", "--config", cfg]) == 1
    assert "seed" in capsys.readouterr().err


def test_quadrature(tmp_path):
    cfg = write(tmp_path, "q.json", {"m": 1, "potential": [], "observables": ["11", "1111"]})
    out = str(tmp_path / "q.csv")
    assert run(["quadrature", "--config", cfg, "--out", out]) == 0
    vals = {r[0]: float(r[1]) for r in rows(out)[1:]}
    assert abs(vals["11"] - 1) < 1e-10 and abs(vals["1111"] - 3) < 1e-10


@pytest.mark.parametrize("text,msg", [("{\"m\": 1, \"terms\": [", "line 1"),
                                      (json.dumps({"m": 0, "terms": []}), "positive"),
                                      (json.dumps({"m": 1, "terms": [["x", "11"]]}), "rational"),
                                      (json.dumps({"m": 1, "terms": ["13"]}), "terms[0]")])
def test_malformed_potential(tmp_path, capsys, text, msg):
    p = write(tmp_path, "bad.json", text)
    assert run(["free-energy", "--potential", p, "--K", "2"]) == 1
    assert msg in capsys.readouterr().err


def test_missing_file(capsys):
    assert run(["free-energy", "--potential", "/nonexistent.json", "--K", "2"]) == 1


def test_run_config_validation():
    with pytest.raises(ConfigError):
        RunConfig("solve", K=-1)
    with pytest.raises(ConfigError):
        RunConfig("solve", ell_max=0)
    with pytest.raises(ConfigError):
        RunConfig("solve", format="xml")


def test_potential_from_json_mixed_values():
    with pytest.raises(ConfigError):
        potential_from_json({"m": 1, "terms": [["1", "11"], "1111"]})
    V = potential_from_json({"m": 2, "terms": [["1/10", "1212"], [0.5, "X1*X1"]]})
    assert V.monomials == ((1, 2, 1, 2), (1, 1))


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "mapgenus", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "simulate" in out.stdout
