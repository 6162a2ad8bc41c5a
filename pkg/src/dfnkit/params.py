"""Cell parameters, open-circuit potential curves and electrolyte property functions."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ConfigurationError, DomainError

FARADAY = 96485.33212  # C/mol
GAS_CONSTANT = 8.314462618  # J/(mol K)
T_REF = 298.15  # K


class OCPCurve:
    """Open-circuit potential as a function of stoichiometry.

    Built either from an ordered sample table (monotone cubic interpolation)
    or from a closed-form expression valid on ``[lo, hi]``. Evaluating outside
    the valid range raises :class:`DomainError`; there is no extrapolation.
    """

    def __init__(self, theta, voltage, name: str = "electrode"):
        theta = np.asarray(theta, dtype=float)
        voltage = np.asarray(voltage, dtype=float)
        if theta.ndim != 1 or theta.shape != voltage.shape or theta.size < 2:
            raise ConfigurationError(f"{name}: OCP table needs two or more (theta, U) pairs")
        if np.any(np.diff(theta) <= 0):
            raise ConfigurationError(f"{name}: OCP theta samples must be strictly increasing")
        if not np.all(np.isfinite(voltage)):
            raise ConfigurationError(f"{name}: OCP table contains non-finite voltages")
        self.name = name
        self.theta = theta
        self.voltage = voltage
        self.lo = float(theta[0])
        self.hi = float(theta[-1])
        self._fn = None
        self._dfn = None
        self._interp = PchipInterpolator(theta, voltage, extrapolate=False)
        self._slope = self._interp.derivative()
        self._coef = self._interp.c  # (4, m) cubic coefficients per interval
        h = np.diff(theta)
        # equally spaced tables allow direct interval lookup
        self._uniform_h = float(h[0]) if np.allclose(h, h[0], rtol=1e-9, atol=0) else None

    @classmethod
    def from_function(cls, fn: Callable, lo: float = 0.0, hi: float = 1.0, name: str = "electrode",
                      derivative: Callable | None = None) -> "OCPCurve":
        obj = cls.__new__(cls)
        obj.name = name
        obj.lo, obj.hi = float(lo), float(hi)
        obj.theta = obj.voltage = None
        obj._fn = fn
        obj._dfn = derivative
        obj._interp = obj._slope = obj._coef = obj._uniform_h = None
        return obj

    def _check(self, theta):
        th = np.asarray(theta, dtype=float)
        if th.size and th.min() >= self.lo and th.max() <= self.hi:
            return th
        bad = ~((th >= self.lo) & (th <= self.hi))
        if np.any(bad):
            value = th[bad].flat[0] if th.ndim else float(th)
            raise DomainError(
                f"{self.name} OCP evaluated at theta={value!r}, outside [{self.lo}, {self.hi}]")
        return th

    def __call__(self, theta):
        th = self._check(theta)
        if self._fn is not None:
            return self._fn(th)
        return self._interp(th)

    def value_and_slope(self, theta):
        """Potential and dU/dtheta together (one table lookup for tabulated curves)."""
        th = self._check(theta)
        if self._fn is not None:
            return self(th), self.slope(th)
        last = self.theta.size - 2
        if self._uniform_h is not None:
            k = np.minimum(((th - self.lo) / self._uniform_h).astype(np.intp), last)
        else:
            k = np.minimum(np.searchsorted(self.theta, th, side="right") - 1, last)
        dt = th - self.theta[k]
        c3, c2, c1, c0 = self._coef[:, k]
        value = ((c3 * dt + c2) * dt + c1) * dt + c0
        slope = (3.0 * c3 * dt + 2.0 * c2) * dt + c1
        return value, slope

    def slope(self, theta):
        th = self._check(theta)
        if self._fn is not None:
            if self._dfn is not None:
                return self._dfn(th)
            h = 1e-7
            lo = np.maximum(th - h, self.lo)
            hi = np.minimum(th + h, self.hi)
            return (self._fn(hi) - self._fn(lo)) / (hi - lo)
        return self._slope(th)

    def __reduce__(self):
        if self._fn is not None:
            return (_rebuild_fn_curve, (self._fn, self.lo, self.hi, self.name, self._dfn))
        return (OCPCurve, (self.theta, self.voltage, self.name))


def _rebuild_fn_curve(fn, lo, hi, name, dfn):
    return OCPCurve.from_function(fn, lo, hi, name, dfn)


def ocp_eval(curve: OCPCurve, theta):
    """Open-circuit potential [V] of ``curve`` at stoichiometry ``theta``."""
    return curve(theta)


def load_ocp_csv(path, name: str = "electrode") -> OCPCurve:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    return OCPCurve(data[:, 0], data[:, 1], name=name)


# Electrolyte properties for LiPF6 in EC:EMC (Nyman et al. 2008 fits).
def electrolyte_diffusivity_nyman2008(c_e):
    x = np.asarray(c_e) / 1000.0
    return 8.794e-11 * x**2 - 3.972e-10 * x + 4.862e-10


def electrolyte_conductivity_nyman2008(c_e):
    x = np.asarray(c_e) / 1000.0
    return 0.1297 * x**3 - 2.51 * x**1.5 + 3.329 * x


class PropertyCurve:
    """Electrolyte property as a function of concentration.

    Either a constant, or samples ``(c, value)`` interpolated linearly and held
    constant beyond the sampled range.
    """

    def __init__(self, value=None, c=None, values=None):
        if value is None and c is None:
            raise ConfigurationError("PropertyCurve needs a constant or a sample table")
        self.value = None if value is None else float(value)
        self.c = None if c is None else np.asarray(c, dtype=float)
        self.values = None if values is None else np.asarray(values, dtype=float)
        if self.c is not None and np.any(np.diff(self.c) <= 0):
            raise ConfigurationError("property table concentrations must be strictly increasing")

    def __call__(self, c_e):
        if self.value is not None:
            return np.full(np.shape(c_e), self.value)
        return np.interp(c_e, self.c, self.values)


_PACKAGE_DATA = resources.files("dfnkit") / "data"


def fixture_ocp_positive() -> OCPCurve:
    with resources.as_file(_PACKAGE_DATA / "ocp_nmc811_lgm50.csv") as p:
        return load_ocp_csv(p, name="positive")


def fixture_ocp_negative() -> OCPCurve:
    with resources.as_file(_PACKAGE_DATA / "ocp_graphite_siox_lgm50.csv") as p:
        return load_ocp_csv(p, name="negative")


@dataclass(frozen=True)
class CellParameters:
    """Geometric, stoichiometric, transport and kinetic constants of one cell.

    Units are SI except ``Q_nom`` (Ah). ``De`` and ``Kappa`` are dimensionless
    multipliers applied to the nominal electrolyte property functions so that
    they can be identified as scalars.
    """

    L_n: float
    L_s: float
    L_p: float
    R_p_pos: float
    R_p_neg: float
    eps_e_n: float
    eps_e_s: float
    eps_e_p: float
    eps_s_n: float
    eps_s_p: float
    brugg: float
    A_cell: float
    theta100_p: float
    theta100_n: float
    theta0_p: float
    theta0_n: float
    cs_max_p: float
    cs_max_n: float
    c0: float
    Dsp: float
    Dsn: float
    kp: float
    kn: float
    t1_constant: float
    sigma_p: float
    sigma_n: float
    Q_nom: float
    V_min: float
    V_max: float
    ocp_p: OCPCurve = field(compare=False, repr=False, default=None)
    ocp_n: OCPCurve = field(compare=False, repr=False, default=None)
    De_fn: Callable = field(compare=False, repr=False, default=electrolyte_diffusivity_nyman2008)
    Kappa_fn: Callable = field(compare=False, repr=False, default=electrolyte_conductivity_nyman2008)
    De: float = 1.0
    Kappa: float = 1.0
    T: float = T_REF

    def __post_init__(self):
        if self.ocp_p is None:
            object.__setattr__(self, "ocp_p", fixture_ocp_positive())
        if self.ocp_n is None:
            object.__setattr__(self, "ocp_n", fixture_ocp_negative())
        self.validate()

    def validate(self):
        positive = ("L_n", "L_s", "L_p", "R_p_pos", "R_p_neg", "A_cell", "cs_max_p", "cs_max_n",
                    "c0", "Dsp", "Dsn", "kp", "kn", "sigma_p", "sigma_n", "Q_nom", "T", "De", "Kappa")
        for name in positive:
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ConfigurationError(f"{name} must be strictly positive, got {v!r}")
        for name in ("eps_e_n", "eps_e_s", "eps_e_p", "eps_s_n", "eps_s_p", "t1_constant"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ConfigurationError(f"{name} must lie in (0, 1), got {v!r}")
        if self.eps_e_n + self.eps_s_n > 1 + 1e-12 or self.eps_e_p + self.eps_s_p > 1 + 1e-12:
            raise ConfigurationError("electrolyte plus solid volume fraction exceeds 1")
        if not 0 <= self.theta0_n < self.theta100_n <= 1:
            raise ConfigurationError(
                f"need 0 <= theta0_n < theta100_n <= 1, got {self.theta0_n}, {self.theta100_n}")
        if not 0 <= self.theta100_p < self.theta0_p <= 1:
            raise ConfigurationError(
                f"need 0 <= theta100_p < theta0_p <= 1, got {self.theta100_p}, {self.theta0_p}")
        if self.brugg < 0:
            raise ConfigurationError("brugg must be nonnegative")
        if self.V_min >= self.V_max:
            raise ConfigurationError("V_min must be below V_max")

    def replace(self, **changes) -> "CellParameters":
        return dataclasses.replace(self, **changes)

    def electrode_capacity(self, electrode: str) -> float:
        """Capacity [Ah] of the stoichiometric window of one electrode."""
        if electrode == "n":
            return (self.eps_s_n * self.L_n * self.A_cell * FARADAY * self.cs_max_n
                    * abs(self.theta100_n - self.theta0_n) / 3600.0)
        if electrode == "p":
            return (self.eps_s_p * self.L_p * self.A_cell * FARADAY * self.cs_max_p
                    * abs(self.theta100_p - self.theta0_p) / 3600.0)
        raise ValueError(f"electrode must be 'n' or 'p', got {electrode!r}")


def lg_m50() -> CellParameters:
    """Nominal parameters for an LG INR21700-M50 cell.

    Geometry, transport and OCP data follow the Chen et al. (2020)
    parameterization; the rate constants are its exchange-current
    prefactors divided by Faraday's constant.
    """
    return CellParameters(
        L_n=85.2e-6, L_s=12e-6, L_p=75.6e-6,
        R_p_pos=5.22e-6, R_p_neg=5.86e-6,
        eps_e_n=0.25, eps_e_s=0.47, eps_e_p=0.335,
        eps_s_n=0.75, eps_s_p=0.665,
        brugg=1.5,
        A_cell=0.1027,
        theta100_p=0.27, theta100_n=0.9014, theta0_p=0.9084, theta0_n=0.0279,
        cs_max_p=63104.0, cs_max_n=33133.0,
        c0=1000.0,
        Dsp=4e-15, Dsn=3.3e-14,
        kp=3.42e-6 / FARADAY, kn=6.48e-7 / FARADAY,
        t1_constant=0.2594,
        sigma_p=0.18, sigma_n=215.0,
        Q_nom=5.0,
        V_min=2.5, V_max=4.2,
    )
