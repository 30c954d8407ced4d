import csv
import json

import pytest

from nsaudit.cli import main

EQ12_CONFIG = """
[solution]
omega0 = 1
P_L = 1
theta1 = 1, 0, 0
theta2 = 0.5, 0, 0
"""


@pytest.fixture
def eq12_config(tmp_path):
    p = tmp_path / "params.ini"
    p.write_text(EQ12_CONFIG)
    return p


def test_audit_theorem1(tmp_path, capsys):
    assert main(["audit", "theorem1", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "theorem1         FAILS" in out
    assert "theorem1-shear   HOLDS" in out
    doc = json.loads((tmp_path / "report.json").read_text())
    assert [c["id"] for c in doc["claims"]] == ["theorem1", "theorem1-shear"]


def test_audit_decay_with_flags(tmp_path):
    assert main(["audit", "decay", "--grid", "16", "--t0", "1.0", "--threshold-stop", "0.9", "--out", str(tmp_path)]) == 0
    claim = json.loads((tmp_path / "report.json").read_text())["claims"][0]
    assert claim["inputs"]["stop_threshold"] == 0.9
    assert claim["residuals"]["t0_source"] == "override"
    assert claim["verdict"] == "HOLDS"


def test_eval(eq12_config, capsys):
    assert main(["eval-eq12", "--config", str(eq12_config), "--rho-L", "0.5,0,0", "--rho-S", "1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["u"] == [1.5, 0.0, 0.0] and doc["regime"] == "Laminar"


def test_eval_singular(eq12_config, capsys):
    assert main(["eval-eq12", "--config", str(eq12_config), "--rho-L", "0,0,0", "--rho-S", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["regime"] == "TurbulenceOnset"


def test_unknown_key_is_error(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[solution]\nomega = 1\n")
    assert main(["eval-eq12", "--config", str(bad), "--rho-L", "1", "--rho-S", "1"]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_missing_config_is_error(tmp_path):
    assert main(["audit", "theorem1", "--config", str(tmp_path / "none.ini"), "--out", str(tmp_path)]) == 2


def test_tube_extract(tmp_path):
    assert main(["tube-extract", "--grid", "48", "--seeds", "1.95,0.1", "--out", str(tmp_path)]) == 0
    rows = list(csv.reader(open(tmp_path / "tubes.csv")))
    assert rows[0][:3] == ["tube", "station", "arclength"]
    assert len(rows) > 10


def test_simulate(tmp_path):
    cfg = tmp_path / "sim.ini"
    cfg.write_text("[solver]\ncase = taylor-green\nn = 16\nnu = 0.1\ndt = 0.05\nt_end = 0.2\nprobes = 1 1; 2 2\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "series.csv").read_text().splitlines()
    assert lines[0] == "t,energy,max_speed,probe0_u,probe0_v,probe1_u,probe1_v"
    assert len(lines) == 6
