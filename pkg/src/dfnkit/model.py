"""DFN (pseudo-two-dimensional) cell model: state layout and residual assembly.

Sign conventions: positive applied current discharges the cell; a positive
interfacial flux ``j`` moves lithium out of the solid into the electrolyte.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .discretize import (Mesh, RadialMethod, effective_property, hermite_weights,
                         spherical_fdm_rates, spherical_fvm_rates)
from .errors import AssemblyError, ConfigurationError, DomainError, SaturationError
from .params import FARADAY, GAS_CONSTANT, CellParameters

BLOCKS = ("cs_n", "cs_p", "ce", "phis_n", "phis_p", "phie")


@dataclass(frozen=True)
class StateLayout:
    """Index map of the state vector.

    Blocks in order: solid concentration (negative, positive; x-major with
    the radial index fastest), electrolyte concentration, solid potential
    (negative, positive), electrolyte potential.
    """

    nx_n: int
    nx_s: int
    nx_p: int
    nr_n: int
    nr_p: int

    @classmethod
    def from_mesh(cls, mesh: Mesh) -> "StateLayout":
        return cls(mesh.nx_n, mesh.nx_s, mesh.nx_p, mesh.nr_n, mesh.nr_p)

    @property
    def nx(self) -> int:
        return self.nx_n + self.nx_s + self.nx_p

    def sizes(self) -> dict:
        return {
            "cs_n": self.nx_n * self.nr_n,
            "cs_p": self.nx_p * self.nr_p,
            "ce": self.nx,
            "phis_n": self.nx_n,
            "phis_p": self.nx_p,
            "phie": self.nx,
        }

    def slices(self) -> dict:
        out, start = {}, 0
        for name, size in self.sizes().items():
            out[name] = slice(start, start + size)
            start += size
        return out

    def __getitem__(self, name) -> slice:
        return self.slices()[name]

    @property
    def size(self) -> int:
        return sum(self.sizes().values())

    @property
    def differential_mask(self) -> np.ndarray:
        mask = np.zeros(self.size, dtype=bool)
        s = self.slices()
        for name in ("cs_n", "cs_p", "ce"):
            mask[s[name]] = True
        return mask


@dataclass
class CellState:
    y: np.ndarray
    yp: np.ndarray
    t: float = 0.0


def butler_volmer_flux(c_surf, c_e, eta, k, cs_max, T):
    """Interfacial molar flux [mol/(m^2 s)] with symmetric transfer coefficients."""
    c_surf = np.asarray(c_surf, dtype=float)
    if c_surf.min() <= 0 or c_surf.max() >= cs_max:
        raise SaturationError(
            f"surface concentration outside (0, {cs_max}): "
            f"min {np.min(c_surf):.6g}, max {np.max(c_surf):.6g}")
    if np.min(c_e) <= 0:
        raise DomainError("electrolyte concentration must be positive")
    f = 0.5 * FARADAY / (GAS_CONSTANT * T)
    with np.errstate(over="ignore"):  # an infinite flux is reported through the residual
        return 2.0 * k * np.sqrt(c_e * c_surf * (cs_max - c_surf)) * np.sinh(f * np.asarray(eta))


class _Electrode:
    """Per-electrode constants used inside the residual."""

    def __init__(self, tag, params: CellParameters, mesh: Mesh):
        self.tag = tag
        if tag == "n":
            self.grid = mesh.particle_n
            self.nx = mesh.nx_n
            self.k, self.Ds, self.cs_max = params.kn, params.Dsn, params.cs_max_n
            self.a_s = mesh.a_s_n
            self.ocp = params.ocp_n
            self.sigma_eff = effective_property(params.sigma_n, params.eps_s_n, params.brugg)
            self.dx = mesh.dx[0]
        else:
            self.grid = mesh.particle_p
            self.nx = mesh.nx_p
            self.k, self.Ds, self.cs_max = params.kp, params.Dsp, params.cs_max_p
            self.a_s = mesh.a_s_p
            self.ocp = params.ocp_p
            self.sigma_eff = effective_property(params.sigma_p, params.eps_s_p, params.brugg)
            self.dx = mesh.dx[-1]
        self.hermite = hermite_weights(self.grid)


class DFNModel:
    """Discretized isothermal DFN model for one parameter set and mesh.

    The residual is scaled: concentration rows by the relevant reference
    concentration (units 1/s), potential rows by the 1C current density
    (dimensionless), and the electrolyte-potential gauge row in volts.
    """

    def __init__(self, params: CellParameters, mesh: Mesh):
        self.params = params
        self.mesh = mesh
        self.layout = StateLayout.from_mesh(mesh)
        self.sl = self.layout.slices()
        self.method = mesh.radial_method
        self.neg = _Electrode("n", params, mesh)
        self.pos = _Electrode("p", params, mesh)
        nn, ns, npos = mesh.nx_n, mesh.nx_s, mesh.nx_p
        self.dx = mesh.dx
        self.eps_e = np.concatenate([np.full(nn, params.eps_e_n), np.full(ns, params.eps_e_s),
                                     np.full(npos, params.eps_e_p)])
        self.brugg_factor = effective_property(1.0, self.eps_e, params.brugg)
        self.f_rt = FARADAY / (GAS_CONSTANT * params.T)
        self.i_ref = params.Q_nom / params.A_cell
        self._pattern = None

    # ------------------------------------------------------------------ pieces
    def split(self, y):
        s, L = self.sl, self.layout
        return (y[s["cs_n"]].reshape(L.nx_n, L.nr_n), y[s["cs_p"]].reshape(L.nx_p, L.nr_p),
                y[s["ce"]], y[s["phis_n"]], y[s["phis_p"]], y[s["phie"]])

    def _interface(self, el: _Electrode, cs, ce, phis, phie):
        """Surface concentration and interfacial flux for every node of one electrode."""
        T = self.params.T
        if self.method is RadialMethod.FDM:
            c_surf = cs[:, -1]
            eta = phis - phie - el.ocp(c_surf / el.cs_max)
            return c_surf, butler_volmer_flux(c_surf, ce, eta, el.k, el.cs_max, T)
        w_in, w_out, w_grad = el.hermite
        c_lin = w_in * cs[:, -2] + w_out * cs[:, -1]
        g = w_grad / el.Ds
        cmax = el.cs_max
        if g == 0.0:
            c = c_lin
        else:
            c = np.minimum(np.maximum(c_lin, 1e-9 * cmax), (1 - 1e-9) * cmax)
            with np.errstate(over="ignore", invalid="ignore"):
                c, ok = self._surface_newton(el, c, c_lin, g, ce, phis, phie)
            if not ok:
                raise SaturationError(
                    f"{'negative' if el.tag == 'n' else 'positive'} surface concentration "
                    "reconstruction did not converge inside (0, cs_max)")
        eta = phis - phie - el.ocp(c / el.cs_max)
        return c, butler_volmer_flux(c, ce, eta, el.k, el.cs_max, T)

    def _surface_newton(self, el, c, c_lin, g, ce, phis, phie):
        # c_surf = c_lin - g*j(c_surf), solved node-wise. F(c) = c - c_lin + g*j(c)
        # is -c_lin at c = 0 and cmax - c_lin at c = cmax, so a root is always
        # bracketed; Newton steps leaving the bracket fall back to bisection.
        cmax = el.cs_max
        f = 0.5 * self.f_rt
        lo = np.zeros_like(c)
        hi = np.full_like(c, cmax)
        for _ in range(100):
            U, dU = el.ocp.value_and_slope(c / cmax)
            s = np.sqrt(ce * c * (cmax - c))
            x = f * (phis - phie - U)
            sh = np.sinh(x)
            F = c - c_lin + g * 2.0 * el.k * s * sh
            dj = 2.0 * el.k * (0.5 * ce * (cmax - 2.0 * c) / s * sh - s * np.cosh(x) * f * dU / cmax)
            step = F / (1.0 + g * dj)
            done = np.abs(step) <= 1e-13 * cmax
            if done.all():
                return c - step, bool(c.min() > 0 and c.max() < cmax)
            lo = np.where(F < 0, c, lo)
            hi = np.where(F > 0, c, hi)
            c_new = c - step
            bad = ~done & (~np.isfinite(c_new) | (c_new <= lo) | (c_new >= hi))
            c = np.where(bad, 0.5 * (lo + hi), c_new)
        return c, False

    def fluxes(self, y):
        """Surface concentrations and interfacial fluxes ``(cn, jn, cp, jp)``."""
        cs_n, cs_p, ce, phis_n, phis_p, phie = self.split(np.asarray(y, dtype=float))
        nn, npos = self.layout.nx_n, self.layout.nx_p
        cn, jn = self._interface(self.neg, cs_n, ce[:nn], phis_n, phie[:nn])
        cp, jp = self._interface(self.pos, cs_p, ce[-npos:], phis_p, phie[-npos:])
        return cn, jn, cp, jp

    def _electrolyte_props(self, ce):
        p = self.params
        D = p.De * p.De_fn(ce) * self.brugg_factor
        kappa = p.Kappa * p.Kappa_fn(ce) * self.brugg_factor
        return D, kappa

    def current_densities(self, y, I_app):
        """Ionic current at every x face and electronic current at electrode faces [A/m^2]."""
        cs_n, cs_p, ce, phis_n, phis_p, phie = self.split(np.asarray(y, dtype=float))
        _, kappa = self._electrolyte_props(ce)
        i_e = self._ionic_current(ce, phie, kappa)
        i_s_n, i_s_p = self._solid_current(phis_n, phis_p, I_app)
        return i_e, i_s_n, i_s_p

    def _ionic_current(self, ce, phie, kappa):
        dx = self.dx
        cond = 2.0 / (dx[:-1] / kappa[:-1] + dx[1:] / kappa[1:])
        lnc = np.log(ce)
        i_e = np.zeros(ce.size + 1)
        i_e[1:-1] = cond * (-(phie[1:] - phie[:-1])
                            + 2.0 / self.f_rt * (1.0 - self.params.t1_constant)
                            * (lnc[1:] - lnc[:-1]))
        return i_e

    def _solid_current(self, phis_n, phis_p, I_app):
        i_app = I_app / self.params.A_cell
        i_n = np.empty(phis_n.size + 1)
        i_n[0], i_n[-1] = i_app, 0.0
        i_n[1:-1] = -self.neg.sigma_eff * np.diff(phis_n) / self.neg.dx
        i_p = np.empty(phis_p.size + 1)
        i_p[0], i_p[-1] = 0.0, i_app
        i_p[1:-1] = -self.pos.sigma_eff * np.diff(phis_p) / self.pos.dx
        return i_n, i_p

    # ---------------------------------------------------------------- residual
    def residual(self, t, y, yp, I_app):
        y = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(y)):
            bad = int(np.flatnonzero(~np.isfinite(y))[0])
            block = next(n for n, s in self.sl.items() if s.start <= bad < s.stop)
            raise AssemblyError(f"non-finite state entry {bad} in block {block}")
        p, L, s = self.params, self.layout, self.sl
        nn, npos = L.nx_n, L.nx_p
        cs_n, cs_p, ce, phis_n, phis_p, phie = self.split(y)
        if np.any(ce <= 0):
            raise DomainError("electrolyte concentration became nonpositive")
        cn, jn = self._interface(self.neg, cs_n, ce[:nn], phis_n, phie[:nn])
        cp, jp = self._interface(self.pos, cs_p, ce[-npos:], phis_p, phie[-npos:])

        out = np.empty_like(y)
        rates = spherical_fdm_rates if self.method is RadialMethod.FDM else spherical_fvm_rates
        out[s["cs_n"]] = (yp[s["cs_n"]] - rates(cs_n, jn, p.Dsn, self.neg.grid).ravel()) / p.cs_max_n
        out[s["cs_p"]] = (yp[s["cs_p"]] - rates(cs_p, jp, p.Dsp, self.pos.grid).ravel()) / p.cs_max_p

        # reaction current per unit volume, zero in the separator
        aj = np.zeros(L.nx)
        aj[:nn] = self.neg.a_s * jn
        aj[-npos:] = self.pos.a_s * jp

        D, kappa = self._electrolyte_props(ce)
        dx = self.dx
        N = np.zeros(L.nx + 1)
        N[1:-1] = -2.0 * (ce[1:] - ce[:-1]) / (dx[:-1] / D[:-1] + dx[1:] / D[1:])
        dce = (-(N[1:] - N[:-1]) / dx + (1.0 - p.t1_constant) * aj) / self.eps_e
        out[s["ce"]] = (yp[s["ce"]] - dce) / p.c0

        i_n, i_p = self._solid_current(phis_n, phis_p, I_app)
        out[s["phis_n"]] = (i_n[:-1] - i_n[1:] - FARADAY * aj[:nn] * dx[:nn]) / self.i_ref
        out[s["phis_p"]] = (i_p[:-1] - i_p[1:] - FARADAY * aj[-npos:] * dx[-npos:]) / self.i_ref

        i_e = self._ionic_current(ce, phie, kappa)
        r_e = (i_e[1:] - i_e[:-1] - FARADAY * aj * dx) / self.i_ref
        r_e[0] = phie[0]  # gauge: electrolyte potential zero at the negative collector
        out[s["phie"]] = r_e
        return out

    # ----------------------------------------------------------------- outputs
    def terminal_voltage(self, y, I_app=0.0):
        _, _, _, phis_n, phis_p, _ = self.split(np.asarray(y, dtype=float))
        i_app = I_app / self.params.A_cell
        v_neg = phis_n[0] + i_app * 0.5 * self.neg.dx / self.neg.sigma_eff
        v_pos = phis_p[-1] - i_app * 0.5 * self.pos.dx / self.pos.sigma_eff
        return float(v_pos - v_neg)

    def mean_stoichiometry(self, y):
        cs_n, cs_p, *_ = self.split(np.asarray(y, dtype=float))
        gn, gp = self.neg.grid, self.pos.grid
        # uniform x spacing inside each electrode, so x-weights are equal
        th_n = np.mean(cs_n @ gn.volumes) / gn.volumes.sum() / self.params.cs_max_n
        th_p = np.mean(cs_p @ gp.volumes) / gp.volumes.sum() / self.params.cs_max_p
        return float(th_p), float(th_n)

    def electrode_soc(self, y):
        p = self.params
        if p.theta100_n == p.theta0_n or p.theta100_p == p.theta0_p:
            raise ConfigurationError("degenerate stoichiometric window")
        th_p, th_n = self.mean_stoichiometry(y)
        soc_p = (th_p - p.theta0_p) / (p.theta100_p - p.theta0_p)
        soc_n = (th_n - p.theta0_n) / (p.theta100_n - p.theta0_n)
        return soc_p, soc_n

    def lithium_inventory(self, y):
        """Moles of lithium in the solid phase and in the electrolyte."""
        p = self.params
        cs_n, cs_p, ce, *_ = self.split(np.asarray(y, dtype=float))
        gn, gp = self.neg.grid, self.pos.grid
        solid = (p.eps_s_n * self.neg.dx * np.sum(cs_n @ gn.volumes) / gn.volumes.sum()
                 + p.eps_s_p * self.pos.dx * np.sum(cs_p @ gp.volumes) / gp.volumes.sum())
        liquid = np.sum(self.eps_e * self.dx * ce)
        return float(solid * p.A_cell), float(liquid * p.A_cell)

    # ---------------------------------------------------------- initial states
    def stoichiometry_at_soc(self, soc):
        p = self.params
        th_n = p.theta0_n + soc * (p.theta100_n - p.theta0_n)
        th_p = p.theta0_p + soc * (p.theta100_p - p.theta0_p)
        return th_p, th_n

    def equilibrium_state(self, soc=None, theta_p=None, theta_n=None, potentials=True):
        """Rested state at uniform stoichiometry; potentials set to the OCPs unless disabled."""
        if soc is not None:
            theta_p, theta_n = self.stoichiometry_at_soc(soc)
        p, s = self.params, self.sl
        y = np.zeros(self.layout.size)
        y[s["cs_n"]] = theta_n * p.cs_max_n
        y[s["cs_p"]] = theta_p * p.cs_max_p
        y[s["ce"]] = p.c0
        if potentials:
            y[s["phis_n"]] = float(p.ocp_n(theta_n))
            y[s["phis_p"]] = float(p.ocp_p(theta_p))
        return y

    # ------------------------------------------------------------------ system
    def sparsity(self) -> sp.csr_matrix:
        """Structural nonzeros of dF/dy + a*dF/dyp."""
        if self._pattern is not None:
            return self._pattern
        L, s = self.layout, self.sl
        n = L.size
        rows, cols = [], []

        def add(r, cs):
            for c in cs:
                rows.append(r)
                cols.append(c)

        ce = np.arange(L.nx) + s["ce"].start
        phie = np.arange(L.nx) + s["phie"].start
        electrodes = [
            ("n", np.arange(L.nx_n), s["cs_n"].start, L.nr_n, s["phis_n"].start),
            ("p", np.arange(L.nx - L.nx_p, L.nx), s["cs_p"].start, L.nr_p, s["phis_p"].start),
        ]
        jdeps = {}
        for tag, xs, cs0, nr, ps0 in electrodes:
            for local, k in enumerate(xs):
                shells = cs0 + local * nr + np.arange(nr)
                deps = [shells[-1], shells[-2], ce[k], phie[k], ps0 + local]
                jdeps[k] = deps
                for i in range(nr):
                    add(shells[i], shells[max(i - 1, 0):i + 2])
                add(shells[-1], deps)
                ps = ps0 + local
                add(ps, [ps0 + m for m in range(max(local - 1, 0), min(local + 2, len(xs)))])
                add(ps, deps)
        for k in range(L.nx):
            nb = range(max(k - 1, 0), min(k + 2, L.nx))
            add(ce[k], [ce[m] for m in nb])
            add(ce[k], jdeps.get(k, []))
            if k == 0:
                add(phie[0], [phie[0]])
                continue
            add(phie[k], [phie[m] for m in nb])
            add(phie[k], [ce[m] for m in nb])
            add(phie[k], jdeps.get(k, []))
        pat = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        pat.data[:] = 1.0
        self._pattern = pat
        return pat

    def dae_system(self, I_app: float):
        from .dae import DAESystem

        return DAESystem(
            residual=_BoundResidual(self, float(I_app)),
            differential_mask=self.layout.differential_mask,
            sparsity=self.sparsity(),
            repair=_RestedPotentials(self),
        )


class _RestedPotentials:
    """Algebraic guess from the outermost-shell stoichiometry of each node."""

    def __init__(self, model):
        self.model = model

    def __call__(self, t, y):
        m, p = self.model, self.model.params
        y = np.array(y, dtype=float)
        cs_n, cs_p, *_ = m.split(y)
        th_n = np.clip(cs_n[:, -1] / p.cs_max_n, p.ocp_n.lo, p.ocp_n.hi)
        th_p = np.clip(cs_p[:, -1] / p.cs_max_p, p.ocp_p.lo, p.ocp_p.hi)
        y[m.sl["phis_n"]] = p.ocp_n(th_n)
        y[m.sl["phis_p"]] = p.ocp_p(th_p)
        y[m.sl["phie"]] = 0.0
        return y


class _BoundResidual:
    """Picklable residual closure at fixed applied current."""

    def __init__(self, model, I_app):
        self.model = model
        self.I_app = I_app

    def __call__(self, t, y, yp):
        return self.model.residual(t, y, yp, self.I_app)


def assemble_residual(state: CellState, params: CellParameters, mesh: Mesh, I_app: float, t=None):
    """Functional form of :meth:`DFNModel.residual`."""
    model = DFNModel(params, mesh)
    if state.y.size != model.layout.size:
        raise AssemblyError(f"state has {state.y.size} entries, layout expects {model.layout.size}")
    return model.residual(state.t if t is None else t, state.y, state.yp, I_app)


def terminal_voltage(state: CellState, model: DFNModel, I_app: float = 0.0) -> float:
    if state.y.size != model.layout.size:
        raise AssemblyError("state does not match layout")
    return model.terminal_voltage(state.y, I_app)


def electrode_soc(state: CellState, model: DFNModel):
    return model.electrode_soc(state.y)
