import json
import subprocess
import sys

import numpy as np
import pytest

from kirchhoff_lab.cli import execute


def run(argv, capsys):
    code = execute([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_poisson_interval(tmp_path, capsys):
    out = tmp_path / "e.csv"
    code, text, _ = run(["poisson", "--domain", "interval", "--n", 199, "--out", out], capsys)
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "x,u" and len(lines) == 200
    report = json.loads(text)
    assert report["sup_norm"] == pytest.approx(0.125, abs=1e-4)
    assert json.loads((tmp_path / "e.json").read_text()) == report
    assert report["config"]["n"] == 199


def test_eigen_square(tmp_path, capsys):
    code, text, _ = run(["eigen", "--domain", "square", "--n", 31, "--out", tmp_path / "phi.csv"], capsys)
    assert code == 0
    lam = json.loads(text)["lambda1"]
    assert lam == pytest.approx(2 * np.pi**2, abs=0.2)


def test_probe_passes(capsys):
    code, text, _ = run(["probe", "--trials", 100, "--seed", 7, "--a", 1, "--b", 1, "--n", 63], capsys)
    report = json.loads(text)
    assert code == 0
    assert report["monotonicity_pass"] == 100 and report["pass"]


def test_app1_infeasible_exit_code(tmp_path, capsys):
    argv = ["app1", "--lambda", 1e3, "--mu", 1e3, "--q", 0.5, "--p", 2, "--n", 63, "--out", tmp_path / "run"]
    code, _, err = run(argv, capsys)
    assert code == 2
    assert "infeasible: min psi > m" in err
    report = json.loads((tmp_path / "run" / "report.json").read_text())
    assert report["accepted"] is False and report["reason"].startswith("infeasible: min psi > m")


def test_app1_writes_fields(tmp_path, capsys):
    argv = ["app1", "--lambda", 0.1, "--mu", 0.1, "--q", 0.5, "--p", 2, "--n", 99, "--out", tmp_path / "run"]
    code, text, _ = run(argv, capsys)
    assert code == 0
    report = json.loads(text)
    assert report["accepted"] and report["config"]["lambda"] == 0.1
    for name in ("u", "lower", "upper", "report"):
        assert (tmp_path / "run" / f"{name}.{'json' if name == 'report' else 'csv'}").exists()


def test_app2_runs(tmp_path, capsys):
    argv = ["app2", "--A", 10, "--B", 1, "--q", 0.5, "--eta", 2, "--a", 1, "--b", 1, "--n", 99, "--out", tmp_path / "r"]
    code, text, _ = run(argv, capsys)
    assert code == 0 and json.loads(text)["u_max"] <= 1.0


def test_solve_config(tmp_path, capsys):
    cfg = {"domain": "interval", "n": 99, "reaction": "constant", "value": 1.0, "a": 1, "b": 1,
           "lower": "zero", "upper": "poisson", "S": 2.0}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    code, text, _ = run(["solve", "--config", path, "--out", tmp_path / "out"], capsys)
    assert code == 0
    report = json.loads(text)
    assert report["config"] == cfg
    assert report["s_star"] == pytest.approx(0.07245, abs=1e-4)


def test_verify_config_with_csv(tmp_path, capsys):
    run(["poisson", "--n", 49, "--out", tmp_path / "e.csv"], capsys)
    cfg = {"n": 49, "reaction": "constant", "value": 1.0, "lower": "zero", "upper": "e.csv", "tol": 1e-10}
    (tmp_path / "v.json").write_text(json.dumps(cfg))
    code, text, _ = run(["verify", "--config", tmp_path / "v.json"], capsys)
    assert code == 0 and json.loads(text)["pass"]
    cfg["value"] = 2.0
    (tmp_path / "v.json").write_text(json.dumps(cfg))
    code, text, _ = run(["verify", "--config", tmp_path / "v.json"], capsys)
    assert code == 2 and not json.loads(text)["checks"]["supersolution"]["pass"]


@pytest.mark.parametrize(
    "argv",
    [["bogus"], ["poisson", "--n", "9", "--out", "x.csv", "--frobnicate"], [], ["poisson", "--n", "2", "--out", "x.csv"]],
)
def test_usage_errors(argv, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    code, _, err = run(argv, capsys)
    assert code == 1 and err


def test_malformed_config(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    code, _, err = run(["solve", "--config", path], capsys)
    assert code == 1 and "malformed" in err


def test_missing_config(tmp_path, capsys):
    code, _, _ = run(["verify", "--config", tmp_path / "absent.json"], capsys)
    assert code == 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "kirchhoff_lab", "poisson", "--n", "9", "--out", str(tmp_path / "e.csv")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0 and json.loads(proc.stdout)["sup_norm"] > 0


def test_solve_warns_on_invalid_barrier(tmp_path, capsys):
    cfg = {"n": 49, "reaction": "constant", "value": 1.0, "lower": "zero", "upper": "poisson", "S": 0.5}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    run(["solve", "--config", path, "--out", tmp_path / "out"], capsys)
    code, _, err = run(["solve", "--config", path, "--out", tmp_path / "out"], capsys)
    assert "upper barrier is not a supersolution" in err
