from __future__ import annotations

import csv
import importlib
import io
import json

import pytest

from factorial_iv.cli import main
from factorial_iv.oracle import ONE_SIDED, random_spec

APP = ["--moments", "application"]
STRICT = ["--no-cross-defiers-a", "--no-joint-compliers-b"]


def _json(capsys, argv):
    assert main([*argv, "--format", "json"]) == 0
    return json.loads(capsys.readouterr().out)


def test_analyze_application(capsys):
    rep = _json(capsys, ["analyze", *APP])
    assert rep["schema_version"] == 1 and rep["command"] == "analyze"
    assert rep["input"]["k"] == 100.0
    assert rep["type_shares"]["p_sd_a"] == pytest.approx(0.28)
    assert rep["iv"]["consistent_with_reported"]


def test_bounds_application_numbers(capsys):
    rep = _json(capsys, ["bounds", *APP, *STRICT, "--y11-ge-y00"])
    b = rep["bounds"]
    assert (b["joint_cc"]["lo"], b["joint_cc"]["hi"]) == pytest.approx((0.0, 7.0865), abs=1e-3)
    laie = b["laie_direct"]["laie"]
    assert (laie["lo"], laie["hi"]) == pytest.approx((-37.2145, 37.2190), abs=1e-3)
    assert "Y11_GE_Y00" in laie["assumptions"]
    ind = b["laie_indirect"]["laie"]
    assert (ind["lo"], ind["hi"]) == pytest.approx((-17.779, 25.514), abs=1e-3)


def test_text_and_csv_formats(capsys):
    assert main(["bounds", *APP, *STRICT, "--format", "text"]) == 0
    text = capsys.readouterr().out
    assert "bounds.joint_cc.hi:" in text
    assert main(["bounds", *APP, *STRICT, "--format", "csv"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["key", "value"]
    assert ["schema_version", "1"] in rows


def test_sensitivity_writes_grid_files(tmp_path, capsys):
    out = tmp_path / "sens"
    argv = ["sensitivity", *APP, "--no-cross-defiers-a", "--y11-ge-y00", "--p-j-b", "free",
            "--grid-res", "5", "--out", str(out), "--format", "json"]
    assert main(argv) == 0
    rep = json.loads((out / "sensitivity_report.json").read_text())
    assert rep["direct"]["upper"]["intercept"] == pytest.approx(7.0865, abs=1e-3)
    assert rep["grid_files"]
    for name in rep["grid_files"]:
        assert (out / name).exists()
    assert any("lambda_3" in name for name in rep["grid_files"])


def test_simulate_is_deterministic_and_round_trips(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["simulate", "--seed", "3", "--n", "400", "--exact-moments", "--out", str(out)]) == 0
    assert (a / "simulated.csv").read_bytes() == (b / "simulated.csv").read_bytes()
    capsys.readouterr()
    rep = _json(capsys, ["analyze", "--input", str(a / "simulated.csv")])
    assert rep["input"]["k_source"] == "observed maximum"
    assert rep["one_sided"]
    exact = _json(capsys, ["analyze", "--moments", str(a / "exact_moments.json")])
    assert exact["type_shares"]


def test_simulate_to_stdout(capsys):
    assert main(["simulate", "--seed", "1", "--n", "10"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "y,d_a,d_b,z_a,z_b" and len(lines) == 11


def test_bounds_on_spec_report_truth_containment(tmp_path, capsys):
    path = tmp_path / "spec.json"
    random_spec(ONE_SIDED, 5, exclude_a=("d",), exclude_b=("j",)).save(path)
    rep = _json(capsys, ["bounds", "--spec", str(path), *STRICT])
    assert rep["truth_containment"]["passed"]


def test_verify_passes(capsys):
    rep = _json(capsys, ["verify", "--count", "5", "--theorem", "T1", "--theorem", "T3"])
    assert rep["passed"] and rep["summary"]["T1"]["run"] == 5


def test_verify_failure_exit_code(monkeypatch, capsys):
    cli = importlib.import_module("factorial_iv.cli")
    verify_module = importlib.import_module("factorial_iv.oracle.verify")
    original = verify_module._interaction_decomposition
    monkeypatch.setattr(verify_module, "_interaction_decomposition", lambda pop: original(pop) + 1e-3)
    monkeypatch.setattr(cli, "verify", verify_module.verify)
    assert main(["verify", "--count", "2", "--theorem", "T3"]) == 4


def test_validation_exit_codes(tmp_path, capsys):
    assert main(["analyze", "--input", str(tmp_path / "missing.csv")]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("y,d_a,d_b,z_a,z_b\n1,2,0,0,0\n")
    assert main(["analyze", "--input", str(bad)]) == 2
    assert main(["analyze", *APP, "--k", "50"]) == 2
    assert main(["analyze", "--spec", str(tmp_path / "nope.json"), "--iv-source", "reported"]) == 2
    assert main(["analyze"]) == 2


def test_reported_iv_source_needs_reported_values(tmp_path, capsys):
    assert main(["simulate", "--seed", "2", "--n", "200", "--out", str(tmp_path)]) == 0
    assert main(["analyze", "--input", str(tmp_path / "simulated.csv"), "--iv-source", "reported"]) == 2


def test_one_sided_violation_exit_codes(tmp_path, capsys):
    rows = ["y,d_a,d_b,z_a,z_b"]
    for za in (0, 1):
        for zb in (0, 1):
            rows += [f"10,{za},{zb},{za},{zb}", f"20,0,0,{za},{zb}"]
    rows.append("30,1,0,0,0")
    path = tmp_path / "two_sided.csv"
    path.write_text("\n".join(rows) + "\n")
    assert main(["bounds", "--input", str(path)]) == 3
    assert main(["bounds", "--input", str(path), "--allow-violations"]) == 3
    assert main(["analyze", "--input", str(path), "--allow-violations"]) == 0


def test_infeasible_share_exit_code(capsys):
    assert main(["bounds", *APP, "--no-cross-defiers-a", "--p-j-b", "0.5"]) == 3
    assert main(["sensitivity", *APP, "--no-cross-defiers-a", "--p-j-b", "0.5"]) == 3
