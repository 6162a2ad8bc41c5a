import json
import math

import pytest

from dfnkit.ident import ObjectiveBreakdown
from dfnkit.report import IdentifiedValue, RunReport


def make_report(**kw):
    base = dict(
        identified={"Dsp": IdentifiedValue(2.1e-15, 5.278e-18, 3.0314e-12, 4e-15),
                    "theta0_n": IdentifiedValue(0.0301, 0.015, 0.04, 0.0279)},
        objective=ObjectiveBreakdown(J_V=0.0033403, J_SOCp=0.030231, J_SOCn=0.019037, J_V_mV=11.7),
        gbest_history=[0.1, 0.05, 0.0038],
        config={"schema_version": 1, "identify": {"seed": 3}},
        timings={"pso_s": 12.5},
        seed=3, evaluations=60, failures=2, stop_reason="max_iters",
    )
    base.update(kw)
    return RunReport(**base)


def test_roundtrip(tmp_path):
    rep = make_report()
    path = rep.write(tmp_path / "r.json")
    back = RunReport.read(path)
    assert back == rep
    assert back.values() == {"Dsp": 2.1e-15, "theta0_n": 0.0301}


def test_penalty_objective_roundtrip(tmp_path):
    rep = make_report(objective=ObjectiveBreakdown.penalty())
    back = RunReport.read(rep.write(tmp_path / "p.json"))
    assert math.isinf(back.objective.J_V_mV)


def test_stable_key_order():
    d = json.loads(make_report().to_json())
    assert list(d)[:3] == ["schema_version", "version", "seed"]
    assert "timings" not in make_report().without_timings()


def test_schema_version_checked():
    d = make_report().to_dict()
    d["schema_version"] = 99
    with pytest.raises(ValueError):
        RunReport.from_dict(d)


def test_console_block():
    text = make_report().format_console()
    assert "Dsp" in text and "5.278e-18" in text and "3.0314e-12" in text
    assert "J_tot" in text
