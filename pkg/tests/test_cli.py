import csv
import io
import json

import pytest

from ris_stogeo import cli
from ris_stogeo.params import ScenarioConfig


def run(capsys, *argv):
    code = cli.main(list(argv))
    return code, capsys.readouterr()


def test_analytic_command(capsys):
    code, out = run(capsys, "analytic", "--set", "tau=5")
    assert code == 0
    rec = json.loads(out.out)
    assert 0.8 < rec["coverage"] < 0.9
    cfg = ScenarioConfig()
    power = cfg.lambda_b * cfg.p_b + cfg.mu * cfg.lambda_l * cfg.p_r
    assert rec["ase"] / rec["ee"] == pytest.approx(power, rel=1e-12)
    assert rec["p_direct"] + rec["p_reflected"] + rec["p_outage"] == pytest.approx(1.0, abs=1e-9)


def test_set_uses_declared_units():
    cfg = cli.build_config(None, ["snr=20", "lambda_b=30", "m_b=32"])
    assert cfg.snr == pytest.approx(100.0)
    assert cfg.lambda_b == pytest.approx(3e-5)
    assert cfg.m_b == 32


def test_bad_config_exit_code(capsys, tmp_path):
    code, out = run(capsys, "analytic", "--set", "gamma=1.2")
    assert code == 2 and "gamma" in out.err
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"mu": 1.5}))
    assert run(capsys, "analytic", "--config", str(path))[0] == 2


def test_mc_command(capsys, tmp_path):
    target = tmp_path / "mc.json"
    code, _ = run(capsys, "mc", "--trials", "2000", "--seed", "3", "--threads", "2", "--out", str(target))
    assert code == 0
    rec = json.loads(target.read_text())
    assert rec["n_trials"] == 2000
    assert rec["p_direct"] + rec["p_reflected"] + rec["p_outage"] == pytest.approx(1.0)


def test_parse_values():
    assert cli.parse_values("1,2,3") == [1.0, 2.0, 3.0]
    assert cli.parse_values("0:1:3") == [0.0, 0.5, 1.0]
    assert cli.parse_values("1:100:3:log") == pytest.approx([1.0, 10.0, 100.0])
    for bad in ("1:2:1", "a,b", "1:2"):
        with pytest.raises(ValueError):
            cli.parse_values(bad)


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_beta_sweep_monotone_and_deterministic():
    spec = cli.SweepSpec("beta", [0.0, 0.5, 1.0, 2.0, 3.0], ("coverage", "ase"), "analytic", 1000, 1)
    text = cli.run_sweep(spec, ScenarioConfig(), timing=False)
    rows = _rows(text)
    cov = [float(r["coverage"]) for r in rows]
    assert all(a <= b for a, b in zip(cov, cov[1:]))
    ase = [float(r["ase"]) for r in rows]
    flags = [r["optimum"] for r in rows]
    assert flags[ase.index(max(ase))] == "ase" and flags[-1] == "coverage"
    assert sum(f != "" for f in flags) == 2
    assert all(r["wall_time"] == "" and r["error"] == "" for r in rows)
    assert cli.run_sweep(spec, ScenarioConfig(), timing=False) == text


def test_sweep_both_engines(capsys):
    code, out = run(capsys, "sweep", "--var", "tau_db", "--values", "0,5", "--engine", "both",
                    "--trials", "3000", "--outputs", "coverage,assoc", "--no-timing")
    assert code == 0
    rows = _rows(out.out)
    assert [r["engine"] for r in rows] == ["analytic", "analytic", "montecarlo", "montecarlo"]
    for a, m in zip(rows[:2], rows[2:]):
        assert abs(float(a["coverage"]) - float(m["coverage"])) <= float(m["coverage_hw"]) + 0.02


def test_sweep_point_errors_are_recorded():
    spec = cli.SweepSpec("mu", [0.5, 1.5], ("coverage",), "analytic", 1000, 1)
    rows = _rows(cli.run_sweep(spec, ScenarioConfig(), timing=False))
    assert rows[0]["error"] == "" and rows[1]["error"] != ""


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        cli.SweepSpec("alpha", [1, 2], ("coverage",), "analytic", 10, 1).validate()
    with pytest.raises(ValueError):
        cli.SweepSpec("beta", [1], ("coverage",), "analytic", 10, 1).validate()
    with pytest.raises(ValueError):
        cli.SweepSpec("beta", [1, 2], ("rate",), "analytic", 10, 1).validate()


def test_optimize_beta(capsys):
    code, out = run(capsys, "optimize", "--target", "beta", "--method", "root")
    rec = json.loads(out.out)
    assert code == 0 and rec["target"] == "beta" and rec["method"] == "root"
    assert 0 < rec["value"] < 4480 / 1088
    assert abs(rec["diagnostics"]["residual"]) <= 1e-8


def test_optimize_mu_density_trend():
    lo = cli.run_optimize(cli.build_config(None, []), "mu", "ee")
    hi = cli.run_optimize(cli.build_config(None, ["lambda_b=30"]), "mu", "ee")
    assert hi["value"] <= lo["value"]
    assert len(hi["diagnostics"]["curve"]) == 11


def test_analytic_seed_independent(capsys):
    a = run(capsys, "analytic", "--seed", "1")[1].out
    b = run(capsys, "analytic", "--seed", "2")[1].out
    assert a == b
