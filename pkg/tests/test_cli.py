import csv
import json

import numpy as np
import pytest

from nmqrt import cli
from nmqrt.acceptance import CriterionResult
from nmqrt.scenario import dump_scenario, load_fixture


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# schema: ")
    return list(csv.DictReader(lines[1:]))


def test_response_columns_and_zero_coupling(tmp_path):
    scen = tmp_path / "zero.json"
    dump_scenario(load_fixture("a").with_lambda(0.0), scen)
    assert cli.main(["run", str(scen), "--cmd", "response", "--out", str(tmp_path / "o")]) == 0
    rows = read_csv(tmp_path / "o" / "response.csv")
    assert list(rows[0]) == cli.RESPONSE_COLUMNS
    assert len(rows) == len(load_fixture("a").grid)
    for r in rows:
        assert abs(float(r["chi_total"]) - float(r["chi_closed"])) <= 1e-12
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["scenario"]["sha256"] == load_fixture("a").with_lambda(0.0).digest()
    assert set(man["diagnostics"]["max_abs_term"]) == {f"term_{i}" for i in range(1, 12)}
    assert "response" in man["wall_times"]


def test_response_is_byte_identical_across_runs(tmp_path, monkeypatch):
    assert cli.main(["run", "c", "--out", str(tmp_path / "1")]) == 0
    monkeypatch.setenv("QRT_THREADS", "3")
    assert cli.main(["run", "c", "--out", str(tmp_path / "2")]) == 0
    a = (tmp_path / "1" / "response.csv").read_bytes()
    b = (tmp_path / "2" / "response.csv").read_bytes()
    assert a == b


def test_floats_round_trip():
    for x in (0.1, 1 / 3, -2.5e-17, 1e300):
        assert float(cli._fmt(x)) == x


def test_sweep_lambda(tmp_path):
    assert cli.main(["run", "a", "--cmd", "sweep-lambda", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "sweep_lambda.csv")
    assert list(rows[0]) == cli.SWEEP_COLUMNS
    man = json.loads((tmp_path / "manifest.json").read_text())
    slopes = man["diagnostics"]["slopes"]
    assert slopes["err_generalized"] == pytest.approx(3.0, abs=0.4)
    assert slopes["err_qrt"] == pytest.approx(2.0, abs=0.4)


def test_estimate_seed_and_steps(tmp_path):
    out1, out2 = tmp_path / "1", tmp_path / "2"
    assert cli.main(["run", "a", "--cmd", "estimate", "--seed", "9", "--out", str(out1), "--steps", "30"]) == 0
    assert cli.main(["run", "a", "--cmd", "estimate", "--seed", "9", "--out", str(out2), "--steps", "30"]) == 0
    d = json.loads((out1 / "estimate.json").read_text())
    assert set(d) == {"truth", "estimate", "eps", "delta", "eps0", "seed"} and d["seed"] == 9
    assert (out1 / "estimate.json").read_bytes() == (out2 / "estimate.json").read_bytes()
    man = json.loads((out1 / "manifest.json").read_text())
    assert man["config"]["steps_per_unit_time"] == 30


def test_converge(tmp_path):
    assert cli.main(["run", "a", "--cmd", "converge", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "converge.json").read_text())
    assert 3.6 <= rep["rk4"]["order"] <= 4.4


def test_invalid_scenario_reports_failure(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    raw = json.loads(dump_scenario(load_fixture("a")))
    raw["system"]["rho0"]["re"] = [0.5, 0.0, 0.0, 0.4]
    bad.write_text(json.dumps(raw))
    code = cli.main(["run", str(bad), "--out", str(tmp_path / "o")])
    assert code != 0
    msg = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert msg["status"] == "failed"
    assert msg["failures"][0]["field"] == "system.rho0"
    assert json.loads((tmp_path / "o" / "failures.json").read_text()) == msg["failures"]


def test_missing_scenario(tmp_path):
    assert cli.main(["run", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2


def test_acceptance_failure_exit_code(tmp_path, monkeypatch, capsys):
    fake = [CriterionResult(1, "one", True, "ok"), CriterionResult(2, "two", False, "broken")]
    monkeypatch.setattr(cli, "run_acceptance", lambda echo=None: fake)
    assert cli.main(["run", "a", "--cmd", "acceptance", "--out", str(tmp_path)]) == 1
    msg = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert [f["criterion"] for f in msg["failures"]] == [2]
    saved = json.loads((tmp_path / "acceptance.json").read_text())
    assert [r["passed"] for r in saved] == [True, False]


def test_parser_rejects_unknown_command(tmp_path):
    with pytest.raises(SystemExit):
        cli.main(["run", "a", "--cmd", "plot", "--out", str(tmp_path)])
