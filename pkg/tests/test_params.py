import math

import numpy as np
import pytest

from dfnkit import ConfigurationError, DomainError, OCPCurve, lg_m50, ocp_eval
from dfnkit.model import butler_volmer_flux
from dfnkit.errors import SaturationError
from dfnkit.params import fixture_ocp_negative, fixture_ocp_positive, PropertyCurve

# frozen outputs of tests/oracles/pchip_scalar.py and tests/oracles/bv_direct.py
OCP_P_AT_02713 = 4.269071507772493
OCP_P_AT_09084 = 3.5614046127999996
OCP_N_AT_00279 = 1.0637322261162685
BV_REFERENCE = 3.0964934136983592e-06


def test_ocp_first_sample_exact():
    c = fixture_ocp_positive()
    assert ocp_eval(c, c.theta[0]) == c.voltage[0]


def test_ocp_two_point_linear():
    c = OCPCurve([0.0, 1.0], [1.0, 0.0])
    assert ocp_eval(c, 0.5) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("curve, theta, expected", [
    (fixture_ocp_positive, 0.2713, OCP_P_AT_02713),
    (fixture_ocp_positive, 0.9084, OCP_P_AT_09084),
    (fixture_ocp_negative, 0.0279, OCP_N_AT_00279),
])
def test_ocp_matches_scalar_oracle(curve, theta, expected):
    assert float(curve()(theta)) == pytest.approx(expected, rel=1e-12)


def test_ocp_value_and_slope_consistent():
    c = fixture_ocp_negative()
    th = np.linspace(0.0, 1.0, 997)
    v, s = c.value_and_slope(th)
    np.testing.assert_allclose(v, c(th), rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(s, c.slope(th), rtol=1e-10, atol=1e-10)


def test_ocp_out_of_range_names_electrode():
    c = fixture_ocp_positive()
    with pytest.raises(DomainError, match="positive.*1.01"):
        c(1.01)
    with pytest.raises(DomainError):
        c(np.array([0.5, -0.2]))


def test_ocp_closed_form():
    c = OCPCurve.from_function(lambda th: 4.0 - th, 0.1, 0.9, name="toy")
    assert c(0.5) == pytest.approx(3.5)
    assert c.slope(0.5) == pytest.approx(-1.0, rel=1e-6)
    with pytest.raises(DomainError, match="toy"):
        c(0.95)


def test_ocp_table_validation():
    with pytest.raises(ConfigurationError):
        OCPCurve([0.0, 0.0, 1.0], [1.0, 0.5, 0.0])
    with pytest.raises(ConfigurationError):
        OCPCurve([0.0], [1.0])


def test_bv_zero_overpotential():
    assert butler_volmer_flux(25000.0, 1000.0, 0.0, 1e-11, 50000.0, 298.15) == 0.0


def test_bv_odd():
    a = butler_volmer_flux(12000.0, 800.0, 0.037, 2e-11, 50000.0, 298.15)
    b = butler_volmer_flux(12000.0, 800.0, -0.037, 2e-11, 50000.0, 298.15)
    assert a == -b


def test_bv_matches_direct_formula():
    j = butler_volmer_flux(25000.0, 1000.0, 0.01, 1e-11, 50000.0, 298.15)
    assert float(j) == pytest.approx(BV_REFERENCE, rel=1e-13)


@pytest.mark.parametrize("cs", [0.0, -1.0, 50000.0, 60000.0])
def test_bv_saturation(cs):
    with pytest.raises(SaturationError):
        butler_volmer_flux(cs, 1000.0, 0.01, 1e-11, 50000.0, 298.15)


def test_bv_vanishes_at_limits():
    small = butler_volmer_flux(1e-9, 1000.0, 0.05, 1e-11, 50000.0, 298.15)
    big = butler_volmer_flux(50000.0 - 1e-9, 1000.0, 0.05, 1e-11, 50000.0, 298.15)
    mid = butler_volmer_flux(25000.0, 1000.0, 0.05, 1e-11, 50000.0, 298.15)
    assert abs(small) < 1e-6 * abs(mid) and abs(big) < 1e-6 * abs(mid)


def test_lg_m50_invariants():
    p = lg_m50()
    assert 0 <= p.theta0_n < p.theta100_n <= 1
    assert 0 <= p.theta100_p < p.theta0_p <= 1
    assert p.T == 298.15


@pytest.mark.parametrize("change", [
    {"theta0_n": 0.95},
    {"theta100_p": 0.95},
    {"L_n": 0.0},
    {"eps_e_n": 0.3, "eps_s_n": 0.75},
    {"t1_constant": 1.2},
])
def test_parameter_invariants_enforced(change):
    with pytest.raises(ConfigurationError):
        lg_m50().replace(**change)


def test_window_capacity_identity():
    p = lg_m50()
    # eps_s * L * A * F * cs_max * |dtheta| / 3600 evaluated by hand for the negative electrode
    expected = 0.75 * 85.2e-6 * 0.1027 * 96485.33212 * 33133.0 * (0.9014 - 0.0279) / 3600.0
    assert p.electrode_capacity("n") == pytest.approx(expected, rel=1e-14)


def test_property_curve_forms():
    assert PropertyCurve(value=2.0)(np.array([1.0, 3.0])).tolist() == [2.0, 2.0]
    pc = PropertyCurve(c=[0.0, 1000.0, 2000.0], values=[1.0, 2.0, 4.0])
    assert pc(1500.0) == pytest.approx(3.0)
