from __future__ import annotations

import csv
import dataclasses
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from brflow import __version__
from brflow import cli
from brflow.catalog import EndBehavior
from brflow.cli import (
    EXIT_ERROR,
    EXIT_OK,
    EXIT_UNRESOLVED,
    RunConfig,
    basin_csv,
    main,
    parse_grid,
    sweep_basin,
    table1_passed,
    table1_rows,
)
from brflow.errors import ConfigError
from brflow.seeds import load_seeds


def _config(tmp_path, doc: dict, name: str = "run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def _simulate(tmp_path, doc: dict, capsys):
    outputs = {"trajectory_csv": str(tmp_path / "traj.csv"), "report_json": str(tmp_path / "report.json")}
    code = main(["simulate", "--config", _config(tmp_path, doc | {"outputs": [outputs]})])
    report = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    return code, report, capsys.readouterr()


# ---------------------------------------------------------------------------
# list-classes
# ---------------------------------------------------------------------------

def test_list_classes_json(capsys):
    assert main(["list-classes", "--json"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    rows = {r["class"]: r for r in doc["classes"]}
    assert len(rows) == 25
    a7 = set(rows["A7i"]["predicted_behaviors"]) | set(rows["A7ii"]["predicted_behaviors"])
    assert a7 == {"Line-1", "Pancake-1", "Pancake-2", "Pancake-3", "Tube"}
    assert rows["B10"]["predicted_behaviors"] == ["Point"]
    assert rows["A1"]["predicted_behaviors"] == ["Trivial"]
    assert doc["version"] == __version__


def test_list_classes_text(capsys):
    assert main(["list-classes"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("A1 ")
    assert "{Point}" in out


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def test_simulate_a4(tmp_path, capsys):
    code, report, out = _simulate(tmp_path, {"class": "A4", "lambdas": [1, 1, 1, 1]}, capsys)
    assert code == EXIT_OK
    assert report["report"]["label"] == "Pancake-2"
    assert report["report"]["t0_estimate"] == pytest.approx(1.0 / 3.0, rel=1e-6)
    assert report["tool"] == "brflow" and report["version"] == __version__
    cfg = report["config"]
    assert cfg["resolved_class"] == "A4"
    assert cfg["integrator"]["rel_tol"] > 0.0
    assert "Pancake-2" in out.out


def test_simulate_a10_has_no_t0(tmp_path, capsys):
    code, report, _ = _simulate(tmp_path, {"class": "A10", "lambdas": [1, 1, 1, 1]}, capsys)
    assert code == EXIT_OK
    assert report["report"]["label"] == "Expanding-1"
    assert report["report"]["t0_estimate"] is None
    assert report["config"]["resolved_class"] == "A10i"


def test_simulate_a9i_basin(tmp_path, capsys):
    code, report, out = _simulate(tmp_path, {"class": "A9i", "lambdas": [1, 1, 2, 1]}, capsys)
    assert code == EXIT_OK
    assert report["report"]["basin"]["label"] == "Q1"
    assert "basin Q1" in out.out


def test_simulate_writes_csv(tmp_path, capsys):
    _simulate(tmp_path, {"class": "B5", "horizon": 1.0}, capsys)
    raw = (tmp_path / "traj.csv").read_bytes()
    assert b"\r\n" not in raw
    rows = list(csv.reader(io.StringIO(raw.decode("utf-8"))))
    assert rows[0][:5] == ["t", "A", "B", "C", "D"]
    np.asarray(rows[1:], dtype=float)


def test_simulate_is_bit_reproducible(tmp_path, capsys):
    doc = {"class": "A7ii", "params": {"alpha": 0.5}, "lambdas": [2, 0.75, 1, 1]}
    blobs = []
    for _ in range(2):
        _simulate(tmp_path, doc, capsys)
        blobs.append(((tmp_path / "traj.csv").read_bytes(), (tmp_path / "report.json").read_bytes()))
    assert blobs[0] == blobs[1]


def test_simulate_unresolved_exit_code(tmp_path, capsys, monkeypatch):
    real = cli.run_and_analyze

    def fake(*args, **kwargs):
        traj, rep = real(*args, **kwargs)
        return traj, dataclasses.replace(rep, label=EndBehavior.Unresolved)

    monkeypatch.setattr(cli, "run_and_analyze", fake)
    code, report, _ = _simulate(tmp_path, {"class": "A4", "lambdas": [1, 1, 1, 1]}, capsys)
    assert code == EXIT_UNRESOLVED
    assert report["report"]["label"] == "Unresolved"


def test_simulate_missing_file(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "absent.json")]) == EXIT_ERROR
    assert "error" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# config diagnostics
# ---------------------------------------------------------------------------

@pytest.mark.parametrize(
    "text, needle",
    [
        ('{"class": "A4",\n "lambdas": [1, 1, 1, 1],}', "run.json:2:"),
        ('{"class": "A4", "lambdas": [1, 1, 1, 1], "colour": 1}', "field 'colour'"),
        ('{"lambdas": [1, 1, 1, 1]}', "field 'class'"),
        ('{"class": "A42", "lambdas": [1, 1, 1, 1]}', "unknown class"),
        ('{"class": "A4"}', "field 'lambdas'"),
        ('{"class": "B3", "lambdas": [1, 1, 1, 1]}', "radii"),
        ('{"class": "A4", "lambdas": [1, 1, -1, 1]}', "lambdas[2]"),
        ('{"class": "A4", "lambdas": [1, 1, 1]}', "4 real numbers"),
        ('{"class": "A2", "params": {"kk": 1}, "lambdas": [1, 1, 1, 1]}', "params.kk"),
        ('{"class": "A2", "params": {"k": "one"}, "lambdas": [1, 1, 1, 1]}', "params.k"),
        ('{"class": "A4", "lambdas": [1, 1, 1, 1], "integrator": {"speed": 1}}', "integrator.speed"),
        ('{"class": "A4", "lambdas": [1, 1, 1, 1], "outputs": [{"png": "x"}]}', "outputs[0].png"),
        ('{"class": "A4", "lambdas": [1, 1, 1, 1], "horizon": -1}', "field 'horizon'"),
        ('{"class": "A7ii", "params": {"alpha": 0.5}, "lambdas": [1, 1, 1, 1]}', "lambda2 = (1 - alpha^2) * lambda3"),
        ('{"class": "A9ii", "params": {"a3": 1}, "lambdas": [1, 2, 1, 1]}', "lambda1 = lambda2"),
        ('[1, 2]', "JSON object"),
    ],
)
def test_config_errors_cite_the_problem(text, needle):
    with pytest.raises(ConfigError) as info:
        RunConfig.from_json(text, "run.json")
    assert needle in str(info.value)


def test_config_error_exit_code(tmp_path, capsys):
    path = _config(tmp_path, {"class": "A4", "lambdas": [1, 1, 1, 1], "colour": 1})
    assert main(["simulate", "--config", path]) == EXIT_ERROR
    err = capsys.readouterr().err
    assert "config error" in err and "colour" in err


def test_resolved_dict_fills_defaults():
    cfg = RunConfig.from_json('{"class": "A10", "lambdas": [1, 2, 3, 1]}')
    d = cfg.resolved_dict()
    assert d["resolved_class"] == "A10iii"
    assert d["horizon"] > 0.0
    assert set(d["integrator"]) >= {"rel_tol", "vanish_floor", "blow_up_cap"}


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def test_verify_oracle(capsys):
    assert main(["verify", "--scope", "oracle"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "[oracle] PASS" in out
    assert "FAIL" not in out


def test_verify_json_seed(capsys):
    assert main(["verify", "--scope", "curvature", "--seed", "0x11", "--json"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["seed"] == 17
    assert doc["suites"][0]["suite"] == "curvature"
    assert doc["suites"][0]["passed"]


def test_verify_json_deterministic(capsys):
    outs = []
    for _ in range(2):
        main(["verify", "--scope", "oracle", "--json"])
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1]


def test_verify_failure_exit_code(capsys, monkeypatch):
    from brflow.verification import ClassResult, SuiteReport

    monkeypatch.setattr(cli, "run_suite", lambda name, seed: SuiteReport(name, seed, [ClassResult("A2", 1.0, 1e-10, 1)]))
    assert main(["verify", "--scope", "oracle"]) == EXIT_ERROR
    assert "[oracle] FAIL" in capsys.readouterr().out


def test_verify_rejects_unknown_scope(capsys):
    with pytest.raises(SystemExit):
        main(["verify", "--scope", "everything"])


# ---------------------------------------------------------------------------
# sweep-basin
# ---------------------------------------------------------------------------

def test_parse_grid():
    axes = parse_grid(["l1=1:3:5,l2=1", "l3=0.2:3:4"])
    np.testing.assert_allclose(axes["l1"], [1, 1.5, 2, 2.5, 3])
    np.testing.assert_allclose(axes["l2"], [1])
    assert axes["l3"].size == 4


@pytest.mark.parametrize(
    "spec, needle",
    [
        ("l1=1:3:5,l2=1", "missing axis l3"),
        ("l1=1,l2=2,l3=1", "lambda1 >= lambda2"),
        ("l1=1,l2=1,l3=-1", "positive"),
        ("l1=1:3,l2=1,l3=1", "lo:hi:n"),
        ("l1=a,l2=1,l3=1", "numbers"),
        ("l4=1,l1=1,l2=1,l3=1", "expected l1"),
    ],
)
def test_parse_grid_errors(spec, needle):
    with pytest.raises(ConfigError, match=needle.replace("(", r"\(")):
        parse_grid([spec])


@pytest.mark.parametrize("lam, label", [((1, 1, 2), "Q1"), ((3, 1, 1), "Q2")])
def test_sweep_single_points(capsys, lam, label):
    grid = f"l1={lam[0]},l2={lam[1]},l3={lam[2]}"
    assert main(["sweep-basin", "--grid", grid, "--workers", "1"]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 1 and rows[0]["label"] == label


def test_sweep_grid_to_file(tmp_path):
    path = tmp_path / "basin.csv"
    code = main(["sweep-basin", "--grid", "l1=1:3:4,l2=1,l3=0.2:3:4", "--workers", "1", "-o", str(path)])
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(path.read_text(encoding="utf-8"))))
    assert len(rows) == 16
    assert list(rows[0]) == ["lambda1", "lambda2", "lambda3", "lambda4", "label", "decision_time"]
    assert {r["label"] for r in rows} == {"Q1", "Q2"}


def test_sweep_same_result_across_worker_counts():
    axes = parse_grid(["l1=1:3:3,l2=1,l3=0.2:3:4"])
    assert basin_csv(sweep_basin(axes, 1.0, None, 1)) == basin_csv(sweep_basin(axes, 1.0, None, 2))


@pytest.mark.parametrize("args", [["--lambda4", "0"], ["--budget", "-1"]])
def test_sweep_rejects_bad_scalars(capsys, args):
    assert main(["sweep-basin", "--grid", "l1=1,l2=1,l3=2", "--workers", "1", *args]) == EXIT_ERROR
    assert "config error" in capsys.readouterr().err


def test_workers_must_be_positive():
    with pytest.raises(SystemExit):
        main(["sweep-basin", "--workers", "0"])


# ---------------------------------------------------------------------------
# table1
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def rows():
    return table1_rows(workers=1)


def test_table1_rows(rows):
    assert table1_passed(rows)
    by_id = {r["seed"]: r for r in rows}
    assert [by_id[f"A6-{c}"]["observed"] for c in ("less", "equal", "greater")] == ["Pancake-2", "Pancake-3", "Pancake-2"]
    assert [by_id[f"A7ii-{c}"]["observed"] for c in ("T1<T2", "T2<T1", "T1=T2")] == ["Pancake-1", "Pancake-2", "Tube"]
    assert by_id["B5"]["observed"] == "Pancake-4"


def test_table1_needs_every_class(rows):
    assert not table1_passed([r for r in rows if r["class"] != "B5"])


def test_table1_fails_on_label_outside_table(rows):
    bad = [dict(r) for r in rows]
    bad[0]["in_table"] = False
    assert not table1_passed(bad)


def test_table1_cli_json(capsys):
    assert main(["table1", "--json", "--workers", "1"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["passed"] and doc["missing_classes"] == []
    assert len(doc["seeds"]) == len(load_seeds())


def test_table1_cli_text(capsys):
    assert main(["table1", "--workers", "1"]) == EXIT_OK
    assert "table1: PASS" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------

def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "brflow", "list-classes", "--json"], capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert len(json.loads(res.stdout)["classes"]) == 25


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out
