import csv
import json
import math

import pytest

from pendulum_bvp import analysis
from pendulum_bvp.cli import DIAGRAM_HEADER, SCAN_HEADER, TIMEMAP_HEADER, main, parse_phi_frac
from pendulum_bvp.timemaps import BranchId, branch_time, make_config


def _rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.reader(lines))


@pytest.fixture(autouse=True)
def in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("TIMEMAP_THREADS", "1")
    return tmp_path


def test_timemap_branch(capsys):
    assert main(["timemap", "--family", "C", "--phi", "0.6", "--z", "0.5,1.0"]) == 0
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert rows[0] == TIMEMAP_HEADER and len(rows) == 3
    c = make_config(0.6)
    assert float(rows[1][5]) == branch_time(BranchId("C"), 0.5, c)


def test_timemap_winding_and_label(capsys):
    assert main(["timemap", "--family", "I", "--k", "1", "--phi", "0.4", "--z", "0.35"]) == 0
    row = list(csv.reader(capsys.readouterr().out.splitlines()))[1]
    assert row[0] == "I1" and row[1] == "1"
    assert float(row[6]) < 0  # decreasing just above phi_star squared


def test_timemap_T_by_alpha(capsys):
    assert main(["timemap", "--family", "T", "--alpha", "0.7853981633974483"]) == 0
    row = list(csv.reader(capsys.readouterr().out.splitlines()))[1]
    assert abs(float(row[5]) - 1.3110287771460599) < 1e-10


def test_timemap_out_of_domain_is_usage_error(capsys):
    assert main(["timemap", "--family", "I", "--phi", "0.6", "--z", "1.5"]) == 2
    assert "domain" in capsys.readouterr().err


def test_scan_phi_coarse(in_tmp):
    assert main(["scan-phi", "--phi-count", "4", "--z-count", "4", "--margin", "0.05"]) == 0
    rows = _rows(in_tmp / "phi_scan.csv")
    assert rows[0] == SCAN_HEADER and len(rows) == 17
    summary = json.loads((in_tmp / "phi_scan.json").read_text())
    assert summary["violation_count"] == 0 and summary["min_Phi"] > 0
    assert (in_tmp / "phi_scan.csv").read_text().startswith("# pendulum_bvp")


def test_scan_phi_sentinel_fails(in_tmp, monkeypatch):
    monkeypatch.setattr(analysis, "Phi", lambda z, phi: -1e-3 if (z < 0.2 and phi < 0.2) else 1.0)
    assert main(["scan-phi", "--phi-count", "4", "--z-count", "4", "--margin", "0.05"]) == 1
    summary = json.loads((in_tmp / "phi_scan.json").read_text())
    assert summary["violation_count"] == 1


def test_diagram_and_check(in_tmp):
    assert main(["diagram", "--phi-frac", "1/4", "--k-max", "1", "--pts", "24"]) == 0
    rows = _rows(in_tmp / "diagram.csv")
    assert rows[0] == DIAGRAM_HEADER
    labels = list(dict.fromkeys(r[0] for r in rows[1:]))
    assert labels == ["I", "A", "B", "C", "I1", "A1", "B1", "C1", "D1", "D1'", "D0'"]
    assert main(["diagram", "--check", "diagram.csv"]) == 0


def test_diagram_check_detects_tampering(in_tmp):
    assert main(["diagram", "--k-max", "0", "--pts", "16"]) == 0
    path = in_tmp / "diagram.csv"
    lines = path.read_text().splitlines(keepends=True)
    fields = lines[3].rstrip("\n").split(",")
    fields[5] = repr(float(fields[5]) + 1e-6)
    lines[3] = ",".join(fields) + "\n"
    path.write_text("".join(lines))
    assert main(["diagram", "--check", "diagram.csv"]) == 1


def test_diagram_json_and_svg(in_tmp):
    assert main(["diagram", "--k-max", "0", "--pts", "16", "--format", "json", "--svg", "d.svg"]) == 0
    obj = json.loads((in_tmp / "diagram.json").read_text())
    assert obj["k_max"] == 0 and obj["rows"]
    assert (in_tmp / "d.svg").read_text().startswith("<svg")


def test_verify_D_and_Dprime(in_tmp):
    code = main(["verify", "--phi", "0.7853981633974483", "--families", "D,Dprime", "--k-max", "1", "--n", "4"])
    assert code == 0
    rep = json.loads((in_tmp / "verify.json").read_text())
    assert rep["failed"] == 0 and rep["checked"] == 16
    assert rep["max_y_residual"] < 1e-6


@pytest.mark.parametrize("tol", ["1e-14", "1e-3", "1e-16"])
def test_tolerance_out_of_range(tol):
    assert main(["verify", "--tol", tol]) == 2


def test_unknown_command_and_family():
    assert main(["bogus"]) == 2
    assert main(["verify", "--families", "Q"]) == 2


def test_config_file_precedence(in_tmp, capsys):
    (in_tmp / "run.cfg").write_text("# comment\nphi = 0.6\nk_max = 0\npts = 16\n")
    assert main(["diagram", "--config", "run.cfg"]) == 0
    rows = _rows(in_tmp / "diagram.csv")
    assert float(rows[1][2]) == 0.6
    assert main(["diagram", "--config", "run.cfg", "--phi", "0.5"]) == 0
    assert float(_rows(in_tmp / "diagram.csv")[1][2]) == 0.5
    (in_tmp / "bad.cfg").write_text("colour = red\n")
    assert main(["diagram", "--config", "bad.cfg"]) == 2


def test_phi_frac():
    assert parse_phi_frac("1/4") == math.pi / 4
    assert main(["timemap", "--family", "B", "--phi-frac", "x/y", "--z", "0.5"]) == 2
    assert main(["timemap", "--family", "B", "--phi", "0.5", "--phi-frac", "1/4", "--z", "0.5"]) == 2


def test_asymptotics(in_tmp, capsys):
    assert main(["asymptotics", "--phis", "0.4,1.1", "--out", "asym.csv"]) == 0
    rows = _rows(in_tmp / "asym.csv")
    assert len(rows) > 1 and all(r[-1] == "1" for r in rows[1:])


def test_verify_D_and_Dprime_at_1_1(in_tmp):
    assert main(["verify", "--phi", "1.1", "--families", "D,Dprime", "--n", "5"]) == 0
    assert json.loads((in_tmp / "verify.json").read_text())["checked"] == 30


def test_verify_default_run(in_tmp):
    assert main(["verify"]) == 0
    rep = json.loads((in_tmp / "verify.json").read_text())
    assert rep["checked"] == 180 and rep["max_V_drift"] < 1e-8


def test_timemap_T_equals_T1_at_phi(capsys):
    assert main(["timemap", "--phi", "0.6", "--family", "T", "--alpha", "0.6"]) == 0
    row = list(csv.reader(capsys.readouterr().out.splitlines()))[1]
    assert abs(float(row[5]) - 1.2198046722442414) < 1e-12


def test_scan_phi_default_run(in_tmp):
    assert main(["scan-phi"]) == 0
    assert len(_rows(in_tmp / "phi_scan.csv")) == 200 * 200 + 1
