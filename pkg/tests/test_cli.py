import json
import subprocess
import sys

import numpy as np
import pytest

from dfnkit.cli import main
from dfnkit.io import load_experiment_csv
from dfnkit.report import RunReport

PREAMBLE = """schema_version = 1
[cell]
preset = "lg_m50"
[mesh]
nx_neg = 4
nx_sep = 3
nx_pos = 4
nr_neg = 4
nr_pos = 4
"""


def test_simulate_bundled(tmp_path, capsys):
    assert main(["simulate", "bundled:cc_1c", "-o", str(tmp_path)]) == 0
    names = {p.name for p in tmp_path.iterdir()}
    assert names == {"simulate.csv", "simulate_voltage.svg", "simulate_soc.svg"}
    out = capsys.readouterr().out
    assert "cutoff" in out


def test_identify_missing_data(tmp_path, capsys):
    cfg = tmp_path / "id.toml"
    cfg.write_text(PREAMBLE + '[identify]\ndata = "absent/data.csv"\n'
                   '[identify.bounds]\ntheta0_n = [0.015, 0.04]\n')
    assert main(["identify", str(cfg), "-o", str(tmp_path / "out")]) == 1
    err = capsys.readouterr().err.strip()
    assert "absent/data.csv" in err
    assert len(err.splitlines()) == 1


def test_usage_errors_exit_2():
    r = subprocess.run([sys.executable, "-m", "dfnkit", "frobnicate", "x"], capture_output=True, text=True)
    assert r.returncode == 2 and "usage" in r.stderr
    r = subprocess.run([sys.executable, "-m", "dfnkit", "simulate", "x", "--bogus"],
                       capture_output=True, text=True)
    assert r.returncode == 2


def test_bad_config_exit_1(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("schema_version = 1\n[cell]\nwidth = 3\n")
    assert main(["simulate", str(cfg)]) == 1
    assert "width" in capsys.readouterr().err


def _drive(tmp_path):
    t = np.arange(0.0, 61.0)
    I = np.repeat([5.0, 0.0, -2.5, 7.5, 2.5, 0.0], 10)
    np.savetxt(tmp_path / "drive.csv", np.column_stack([t, np.append(I, 0.0)]), delimiter=",",
               header="time_s,current_a", comments="")


def test_simulate_then_validate_roundtrip(tmp_path):
    _drive(tmp_path)
    sim_cfg = tmp_path / "sim.toml"
    sim_cfg.write_text(PREAMBLE + '[profile]\ntype = "table"\ndata = "drive.csv"\ninitial_soc = 0.7\n')
    assert main(["simulate", str(sim_cfg), "-o", str(tmp_path / "sim")]) == 0
    load_experiment_csv(tmp_path / "sim" / "simulate.csv")
    val_cfg = tmp_path / "val.toml"
    val_cfg.write_text(PREAMBLE + '[validate]\ndata = "sim/simulate.csv"\ninitial_soc = 0.7\n')
    assert main(["validate", str(val_cfg), "-o", str(tmp_path / "val")]) == 0
    obj = json.loads((tmp_path / "val" / "validate_objective.json").read_text())
    assert obj["J_V_mV"] < 0.1
    assert obj["schema_version"] == 1


def test_identify_and_validate_with_report(tmp_path):
    _drive(tmp_path)
    (tmp_path / "sim.toml").write_text(
        PREAMBLE + '[profile]\ntype = "table"\ndata = "drive.csv"\ninitial_soc = 0.7\n')
    assert main(["simulate", str(tmp_path / "sim.toml"), "-o", str(tmp_path / "sim")]) == 0
    (tmp_path / "id.toml").write_text(
        PREAMBLE + '[identify]\ndata = "sim/simulate.csv"\ninitial_soc = 0.7\nswarm_size = 4\n'
        'max_iters = 1\nseed = 9\n[identify.bounds]\nkn = [5e-12, 2e-11]\n')
    assert main(["identify", str(tmp_path / "id.toml"), "-o", str(tmp_path / "id")]) == 0
    rep = RunReport.read(tmp_path / "id" / "identify_report.json")
    assert set(rep.identified) == {"kn"}
    assert rep.evaluations == 8 and len(rep.gbest_history) == 2
    assert (tmp_path / "id" / "identify_voltage.svg").exists()
    (tmp_path / "val.toml").write_text(
        PREAMBLE + '[validate]\ndata = "sim/simulate.csv"\nreport = "id/identify_report.json"\n'
        'initial_soc = 0.7\n')
    assert main(["validate", str(tmp_path / "val.toml"), "-o", str(tmp_path / "val")]) == 0
    obj = json.loads((tmp_path / "val" / "validate_objective.json").read_text())
    assert obj["J_tot"] == pytest.approx(rep.objective.J_tot, rel=1e-9)


def test_analyze(tmp_path):
    cfg = tmp_path / "an.toml"
    cfg.write_text(PREAMBLE + '[profile]\ntype = "cc"\nc_rate = 1.0\nt_max = 120.0\ninitial_soc = 0.8\n'
                   '[analyze]\nnames = ["kp", "Dsn"]\n')
    assert main(["analyze", str(cfg), "-o", str(tmp_path)]) == 0
    d = json.loads((tmp_path / "sensitivity_report.json").read_text())
    assert d["names"] == ["kp", "Dsn"]
    assert set(d["corr_identifiable"]) <= set(d["LSA_identifiable"])
    assert d["correlation"][0][0] == 1.0
