"""Property-based checks of the invariants of each module."""
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dfnkit import OCPCurve, SimulationResult, build_mesh, lg_m50
from dfnkit.discretize import effective_property, particle_grid, spherical_fvm_rates
from dfnkit.ident import ObjectiveBreakdown, ParameterSpace, SensitivityReport, bounds_from_pct
from dfnkit.ident import correlation_matrix, identifiable_set
from dfnkit.io import ExperimentData, load_experiment_csv, resample_to_experiment, write_experiment_csv
from dfnkit.model import StateLayout, butler_volmer_flux
from dfnkit.params import fixture_ocp_negative, fixture_ocp_positive
from dfnkit.protocols import coulomb_count_soc
from dfnkit.report import IdentifiedValue, RunReport

finite = dict(allow_nan=False, allow_infinity=False)
counts = st.integers(2, 12)


@given(cs=st.floats(1.0, 49999.0), ce=st.floats(1.0, 5000.0), eta=st.floats(-0.3, 0.3),
       k=st.floats(1e-13, 1e-9))
def test_bv_odd_in_eta(cs, ce, eta, k):
    a = butler_volmer_flux(cs, ce, eta, k, 50000.0, 298.15)
    b = butler_volmer_flux(cs, ce, -eta, k, 50000.0, 298.15)
    assert a == -b
    assert np.sign(a) == np.sign(eta)


@given(v=st.floats(1e-20, 1e3), eps=st.floats(1e-3, 1.0), brugg=st.floats(0.0, 3.0))
def test_effective_property_bounds(v, eps, brugg):
    out = effective_property(v, eps, brugg)
    assert 0 < out <= v * (1 + 1e-12) or out == 0.0
    assert effective_property(v, 1.0, brugg) == v
    assert effective_property(v, eps, 0.0) == v


@given(nominal=st.floats(1e-20, 0.99), pct=st.floats(0.01, 0.9))
def test_bounds_from_pct_bracket_nominal(nominal, pct):
    lo, hi = bounds_from_pct(nominal, pct)
    assert lo <= nominal * (1 + 1e-12) and hi >= nominal * (1 - 1e-12)
    assert math.log10(lo) == pytest.approx(math.log10(nominal) * (1 + pct), rel=1e-9, abs=1e-9)


@given(jv=st.floats(0, 10, **finite), jp=st.floats(0, 100, **finite), jn=st.floats(0, 100, **finite))
def test_objective_composition(jv, jp, jn):
    ob = ObjectiveBreakdown(J_V=jv, J_SOCp=jp, J_SOCn=jn)
    assert abs(ob.J_tot - (jv + jp / 100 + jn / 100)) <= 1e-9
    assert ObjectiveBreakdown(J_V=jv, J_SOCp=jp, J_SOCn=jn, J_tot=ob.J_tot) == ob


@given(nx=st.tuples(counts, counts, counts), nr=st.tuples(counts, counts))
def test_layout_partition(nx, nr):
    L = StateLayout(*nx, *nr)
    covered = np.zeros(L.size, dtype=int)
    for s in L.slices().values():
        covered[s] += 1
    assert np.all(covered == 1)
    m = L.differential_mask
    assert m.sum() == nx[0] * nr[0] + nx[2] * nr[1] + sum(nx)


@given(nx=st.tuples(counts, counts, counts), nr=st.tuples(counts, counts))
@settings(max_examples=30)
def test_mesh_tiles_regions(nx, nr):
    p = lg_m50()
    m = build_mesh(*nx, *nr, p)
    n0, n1, _ = nx
    assert m.dx[:n0].sum() == pytest.approx(p.L_n, rel=1e-12)
    assert m.dx[n0:n0 + n1].sum() == pytest.approx(p.L_s, rel=1e-12)
    assert m.dx[n0 + n1:].sum() == pytest.approx(p.L_p, rel=1e-12)
    for g in (m.particle_n, m.particle_p):
        assert g.volumes.sum() == pytest.approx(4 / 3 * math.pi * g.R**3, rel=1e-12)


@given(n=st.integers(2, 30), c=arrays(float, 30, elements=st.floats(0.0, 5e4)),
       j=st.floats(-1e-4, 1e-4))
def test_fvm_conserves_mass(n, c, j):
    g = particle_grid(4e-6, n)
    rates = spherical_fvm_rates(c[:n], j, 1e-14, g)
    dmean = rates @ g.volumes / g.volumes.sum()
    assert dmean == pytest.approx(-3 * j / g.R, rel=1e-9, abs=1e-9 * abs(3 * 1e-4 / g.R))


@given(th=arrays(float, 20, elements=st.floats(0.0, 1.0)))
def test_ocp_fixture_monotone(th):
    # PCHIP of a monotone table is monotone
    th = np.sort(th)
    for curve in (fixture_ocp_positive(), fixture_ocp_negative()):
        u = curve(th)
        assert np.all(np.isfinite(u))
        assert np.all(np.diff(u) <= 1e-12)


@given(x=st.floats(0.0, 1.0), shift=st.floats(-2.0, 2.0))
def test_ocp_two_point_exact(x, shift):
    c = OCPCurve([0.0, 1.0], [shift, shift - 1.0])
    assert float(c(x)) == pytest.approx(shift - x, abs=1e-12)


@given(u=arrays(float, 3, elements=st.floats(0.0, 1.0)))
def test_parameter_space_roundtrip(u):
    space = ParameterSpace(("a", "b", "c"), (1e-16, -2.0, 0.1), (1e-10, 3.0, 0.9))
    x = space.from_unit(u)
    assert np.all(x >= space.lower) and np.all(x <= space.upper)
    np.testing.assert_allclose(space.to_unit(x), u, atol=1e-9)


@given(I=arrays(float, 25, elements=st.floats(-20.0, 20.0)), soc0=st.floats(0.0, 1.0),
       Q=st.floats(0.1, 100.0))
def test_coulomb_count_linear(I, soc0, Q):
    t = np.arange(25.0) * 3.0
    a = coulomb_count_soc(t, I, Q, soc0)
    b = coulomb_count_soc(t, 2 * I, Q, soc0)
    assert a[0] == soc0
    np.testing.assert_allclose(b - soc0, 2 * (a - soc0), atol=1e-12)


@given(data=arrays(float, (3, 40), elements=st.floats(-1.0, 1.0)))
def test_correlation_matrix_properties(data):
    for row in data:
        assume(np.ptp(row) > 1e-3)
    traces = {f"p{i}": (row, row[::-1], row ** 2) for i, row in enumerate(data)}
    rep = SensitivityReport(names=list(traces), S={n: 1.0 + i for i, n in enumerate(traces)},
                            t=np.arange(40.0), traces=traces)
    C = correlation_matrix(rep)
    np.testing.assert_array_equal(np.diag(C), 1.0)
    np.testing.assert_array_equal(C, C.T)
    finite_c = C[np.isfinite(C)]
    assert np.all(np.abs(finite_c) <= 1.0)
    rep.corr = C
    lsa_set, corr_set = identifiable_set(rep, 0.5, 0.8)
    assert set(corr_set) <= set(lsa_set)


@given(V=arrays(float, 12, elements=st.floats(2.5, 4.2)))
def test_resample_on_own_grid_is_identity(V):
    t = np.cumsum(np.full(12, 0.7))
    sim = SimulationResult(t=t, V=V, I=np.zeros(12), SOC_p=V / 5, SOC_n=V / 6)
    out = resample_to_experiment(sim, ExperimentData(t, np.zeros(12), V))
    np.testing.assert_array_equal(out.V, V)


@settings(max_examples=25)
@given(V=arrays(float, 6, elements=st.floats(2.0, 4.5, **finite)),
       I=arrays(float, 6, elements=st.floats(-50, 50, **finite)),
       dt=arrays(float, 6, elements=st.floats(1e-3, 100.0)))
def test_experiment_csv_roundtrip(tmp_path_factory, V, I, dt):
    exp = ExperimentData(np.cumsum(dt), I, V)
    path = write_experiment_csv(exp, tmp_path_factory.mktemp("csv") / "e.csv")
    assert load_experiment_csv(path) == exp


@settings(max_examples=25)
@given(vals=st.lists(st.floats(1e-12, 1.0, **finite), min_size=1, max_size=4),
       hist=st.lists(st.floats(0, 10, **finite), min_size=1, max_size=10), seed=st.integers(0, 2**31))
def test_report_roundtrip(tmp_path_factory, vals, hist, seed):
    ident = {f"p{i}": IdentifiedValue(v, v / 2, v * 2, v) for i, v in enumerate(vals)}
    rep = RunReport(identified=ident, objective=ObjectiveBreakdown(J_V=0.1, J_SOCp=1.0, J_SOCn=2.0,
                                                                   J_V_mV=350.0),
                    gbest_history=hist, seed=seed, timings={"pso_s": 1.0})
    path = rep.write(tmp_path_factory.mktemp("rep") / "r.json")
    assert RunReport.read(path) == rep
