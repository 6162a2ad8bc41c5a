import dataclasses

import numpy as np
import pytest

from dfnkit import CC, ConfigurationError, DomainError, SimulationError, lg_m50
from dfnkit.ident import SensitivityReport, correlation_matrix, identifiable_set, lsa
from dfnkit.params import CellParameters


@dataclasses.dataclass(frozen=True)
class DummyParameters(CellParameters):
    """Cell parameters with one extra field the model never reads."""

    dummy: float = 1.0


def with_dummy():
    p = lg_m50()
    return DummyParameters(**{f.name: getattr(p, f.name) for f in dataclasses.fields(p)})


SHORT = CC(1.0, t_max=300.0)


def test_dummy_parameter_has_zero_sensitivity(mesh5):
    rep = lsa(with_dummy(), ["dummy", "Dsn"], SHORT, mesh=mesh5, initial_soc=0.9)
    assert rep.S["dummy"] == 0.0
    assert rep.S["Dsn"] > 0.0
    assert rep.failed == {}


def test_reordering_invariance(params, mesh5):
    names = ["kp", "Dsn", "L_p"]
    a = lsa(params, names, SHORT, mesh=mesh5, initial_soc=0.9)
    b = lsa(params, names[::-1], SHORT, mesh=mesh5, initial_soc=0.9)
    for n in names:
        assert abs(a.S[n] - b.S[n]) <= 1e-12 * max(1.0, a.S[n])
    ia, ib = [names.index(n) for n in names], [names[::-1].index(n) for n in names]
    np.testing.assert_allclose(a.corr[np.ix_(ia, ia)], b.corr[np.ix_(ib, ib)], atol=1e-12)


def test_delta_halving_consistent(params, mesh5):
    names = ["kn", "Dsp"]
    a = lsa(params, names, SHORT, delta=0.02, mesh=mesh5, initial_soc=0.9)
    b = lsa(params, names, SHORT, delta=0.01, mesh=mesh5, initial_soc=0.9)
    for n in names:
        assert b.S[n] == pytest.approx(a.S[n], rel=0.10)


def test_stoichiometry_dominates_low_rate(params, mesh5):
    rep = lsa(params, ["theta100_n", "L_s"], CC(1 / 20), delta=0.01, mesh=mesh5, initial_soc=1.0)
    assert rep.S["theta100_n"] > rep.S["L_s"]


def test_failed_parameter_is_marked(params, mesh5):
    calls = []

    def sim(p):
        calls.append(p)
        if p.kp != params.kp:
            raise SimulationError("diverged", segment=0, time=0.0)
        from dfnkit import run_profile

        return run_profile(p, mesh5, SHORT, 0.9)

    rep = lsa(params, ["kp", "kn"], simulate=sim)
    assert np.isnan(rep.S["kp"]) and "kp" in rep.failed
    assert np.isfinite(rep.S["kn"])


def test_lsa_validation(params, mesh5):
    with pytest.raises(DomainError):
        lsa(params, ["kp"], SHORT, delta=0.0, mesh=mesh5)
    with pytest.raises(ConfigurationError):
        lsa(params, ["ocp_p"], SHORT, mesh=mesh5)
    with pytest.raises(ConfigurationError):
        lsa(params, ["kp", "kp"], SHORT, mesh=mesh5)


def _report(traces, S=None):
    names = list(traces)
    t = np.arange(len(next(iter(traces.values()))[0]), dtype=float)
    S = S or {n: 1.0 for n in names}
    return SensitivityReport(names=names, S=S, t=t, traces=traces)


def test_correlation_self_and_negation(rng):
    x = rng.standard_normal(500)
    rep = _report({"a": (x, x, x), "b": (x, x, x), "c": (-x, -x, -x)})
    C = correlation_matrix(rep)
    assert C[0, 1] == pytest.approx(1.0, abs=1e-12)
    assert C[0, 2] == pytest.approx(-1.0, abs=1e-12)
    np.testing.assert_array_equal(np.diag(C), 1.0)
    np.testing.assert_array_equal(C, C.T)


def test_correlation_independent_noise():
    g = np.random.default_rng(2024)
    a, b = g.standard_normal(10_000), g.standard_normal(10_000)
    third = 10_000 // 3
    rep = _report({"a": (a[:third], a[third:2 * third], a[2 * third:]),
                   "b": (b[:third], b[third:2 * third], b[2 * third:])})
    assert abs(correlation_matrix(rep)[0, 1]) < 0.05


def test_zero_variance_is_nan_and_excluded(rng):
    x = rng.standard_normal(50)
    flat = np.zeros(50)
    rep = _report({"a": (x, x, x), "z": (flat, flat, flat)}, S={"a": 2.0, "z": 1.0})
    C = correlation_matrix(rep)
    assert np.isnan(C[0, 1])
    lsa_set, corr_set = identifiable_set(rep, 0.5, 0.9)
    assert lsa_set == ["a", "z"] and corr_set == ["a"]


def test_greedy_hand_trace():
    rep = SensitivityReport(names=["p1", "p2", "p3"], S={"p1": 3.0, "p2": 2.0, "p3": 1.0},
                            t=np.zeros(0), traces={})
    rep.corr = np.array([[1.0, 0.99, 0.1], [0.99, 1.0, 0.1], [0.1, 0.1, 1.0]])
    lsa_set, corr_set = identifiable_set(rep, beta_LSA=0.5, beta_corr=0.9)
    assert lsa_set == ["p1", "p2", "p3"]
    assert corr_set == ["p1", "p3"]
    assert rep.corr_identifiable == corr_set


def test_threshold_dominance_and_disabled_filter():
    rep = SensitivityReport(names=["p1", "p2"], S={"p1": 3.0, "p2": 2.0}, t=np.zeros(0), traces={})
    rep.corr = np.array([[1.0, 0.99], [0.99, 1.0]])
    assert identifiable_set(rep, 10.0, 0.9) == ([], [])
    assert identifiable_set(rep, 0.1, 1.0) == (["p1", "p2"], ["p1", "p2"])
    with pytest.raises(ConfigurationError):
        identifiable_set(rep, 0.1, 1.5)
