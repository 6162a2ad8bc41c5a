"""Current profiles (CC, HPPC, measured tables) and the simulation driver."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicHermiteSpline

from .dae import SolverConfig, Termination, Trajectory, init_newton_algebraic, init_single_step, solve
from .discretize import Mesh
from .errors import ConfigurationError, DFNError, DomainError, SimulationError
from .model import CellState, DFNModel
from .params import CellParameters

log = logging.getLogger(__name__)

DISCHARGE = "discharge"
CHARGE = "charge"


# ---------------------------------------------------------------- profiles
@dataclass(frozen=True)
class CC:
    """Constant current at ``c_rate`` until the voltage cutoff.

    ``t_max`` caps the run; by default it is 1.25 times the nominal duration.
    """

    c_rate: float
    direction: str = DISCHARGE
    t_max: Optional[float] = None

    def __post_init__(self):
        if self.direction not in (DISCHARGE, CHARGE):
            raise ConfigurationError(f"direction must be 'charge' or 'discharge', got {self.direction!r}")
        if self.c_rate < 0:
            raise ConfigurationError("c_rate must be nonnegative; use direction for the sign")
        if self.t_max is not None and not self.t_max > 0:
            raise ConfigurationError("t_max must be positive")
        if self.c_rate == 0 and self.t_max is None:
            raise ConfigurationError("a zero-rate CC profile needs t_max")

    def duration(self) -> float:
        if self.t_max is not None:
            return float(self.t_max)
        return 1.25 * 3600.0 / self.c_rate


@dataclass(frozen=True)
class Table:
    """Measured current [A] held constant from each timestamp to the next."""

    times: np.ndarray
    currents: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        i = np.asarray(self.currents, dtype=float)
        if t.ndim != 1 or t.shape != i.shape or t.size < 2:
            raise ConfigurationError("table needs matching 1-D times and currents with 2+ samples")
        if np.any(np.diff(t) <= 0):
            raise ConfigurationError("table times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(i))):
            raise ConfigurationError("table contains non-finite values")
        t.flags.writeable = False
        i.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "currents", i)


@dataclass(frozen=True)
class HPPCSchedule:
    """Pulse test stepped down through a list of SOC levels.

    At each level: discharge pulse, rest, charge pulse, rest. Between levels
    the cell is discharged at ``step_c_rate`` to the next SOC and relaxed for
    ``relax_duration``. All defaults are fixture choices.
    """

    pulse_current: float = 2.5
    pulse_duration: float = 10.0
    rest_duration: float = 40.0
    soc_steps: tuple = (0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1)
    step_c_rate: float = 1.0
    relax_duration: float = 600.0
    sample_period: float = 1.0

    def __post_init__(self):
        for name in ("pulse_duration", "rest_duration", "relax_duration", "sample_period", "step_c_rate"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.pulse_current < 0:
            raise ConfigurationError("pulse_current is a magnitude and must be nonnegative")
        steps = tuple(float(s) for s in self.soc_steps)
        if any(not 0 <= s <= 1 for s in steps) or any(b >= a for a, b in zip(steps, steps[1:])):
            raise ConfigurationError("soc_steps must lie in [0, 1] and decrease strictly")
        object.__setattr__(self, "soc_steps", steps)


CurrentProfile = Union[CC, Table, HPPCSchedule]


def crate_to_current(c_rate: float, Q_nom: float, direction: str = DISCHARGE) -> float:
    """Applied current [A] for a C-rate; discharge is positive."""
    if not Q_nom > 0:
        raise DomainError(f"Q_nom must be positive, got {Q_nom}")
    if direction not in (DISCHARGE, CHARGE):
        raise ConfigurationError(f"unknown direction {direction!r}")
    sign = 1.0 if direction == DISCHARGE else -1.0
    return sign * c_rate * Q_nom + 0.0


def expand_hppc(schedule: HPPCSchedule, Q_nom: float, initial_soc: float = 1.0) -> Table:
    """Explicit current table for an HPPC schedule starting at ``initial_soc``."""
    step_current = crate_to_current(schedule.step_c_rate, Q_nom)
    pieces = []  # (duration, current)
    soc = float(initial_soc)
    for target in schedule.soc_steps:
        if target < soc:
            pieces.append((3600.0 * Q_nom * (soc - target) / step_current, step_current))
            pieces.append((schedule.relax_duration, 0.0))
            soc = target
        elif target > soc:
            continue
        pieces += [
            (schedule.pulse_duration, schedule.pulse_current),
            (schedule.rest_duration, 0.0),
            (schedule.pulse_duration, -schedule.pulse_current),
            (schedule.rest_duration, 0.0),
        ]
    if not pieces:
        raise ConfigurationError("HPPC schedule has no SOC level at or below the initial SOC")
    dt = schedule.sample_period
    times, currents = [], []
    t0 = 0.0
    for duration, current in pieces:
        n = max(int(np.ceil(duration / dt - 1e-9)), 1)
        local = np.minimum(np.arange(n) * dt, duration)
        times.append(t0 + local)
        currents.append(np.full(n, current))
        t0 += duration
    times.append([t0])
    currents.append([0.0])
    return Table(np.concatenate(times), np.concatenate(currents))


# ------------------------------------------------------------------ result
@dataclass(frozen=True)
class SimulationResult:
    t: np.ndarray
    V: np.ndarray
    I: np.ndarray
    SOC_p: np.ndarray
    SOC_n: np.ndarray
    termination: str = "completed"
    final_state: Optional[CellState] = field(default=None, repr=False, compare=False)
    snapshots: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n = None
        for name in ("t", "V", "I", "SOC_p", "SOC_n"):
            a = np.array(getattr(self, name), dtype=float)
            if a.ndim != 1:
                raise ConfigurationError(f"{name} must be one-dimensional")
            if n is not None and a.size != n:
                raise ConfigurationError("all traces must have the same length")
            n = a.size
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    def __len__(self):
        return self.t.size


def coulomb_count_soc(t, I, Q: float, soc0: float):
    """SOC from trapezoidal charge throughput (discharge-positive current)."""
    if not Q > 0:
        raise DomainError(f"capacity must be positive, got {Q}")
    t = np.asarray(t, dtype=float)
    I = np.asarray(I, dtype=float)
    if t.shape != I.shape:
        raise ConfigurationError("t and I must have the same length")
    if np.any(np.diff(t) <= 0):
        raise ConfigurationError("t must be strictly increasing")
    return soc0 - cumulative_trapezoid(I, t, initial=0.0) / (3600.0 * Q)


# ------------------------------------------------------------------ driver
def _segments(times, currents):
    """Runs of equal current as (start index, stop index) into the table."""
    change = np.flatnonzero(np.diff(currents) != 0) + 1
    starts = np.concatenate([[0], change])
    stops = np.concatenate([change, [len(times) - 1]])
    return list(zip(starts, stops))


def _observables(model: DFNModel, Y, I):
    """V, SOC_p, SOC_n for each row of ``Y``; all three are linear in the state."""
    p, s = model.params, model.sl
    i_app = I / p.A_cell
    V = (Y[:, s["phis_p"]][:, -1] - Y[:, s["phis_n"]][:, 0]
         - i_app * 0.5 * (model.pos.dx / model.pos.sigma_eff + model.neg.dx / model.neg.sigma_eff))
    gn, gp = model.neg.grid, model.pos.grid
    cs_n = Y[:, s["cs_n"]].reshape(len(Y), -1, gn.n)
    cs_p = Y[:, s["cs_p"]].reshape(len(Y), -1, gp.n)
    th_n = (cs_n @ gn.volumes).mean(axis=1) / gn.volumes.sum() / p.cs_max_n
    th_p = (cs_p @ gp.volumes).mean(axis=1) / gp.volumes.sum() / p.cs_max_p
    soc_n = (th_n - p.theta0_n) / (p.theta100_n - p.theta0_n)
    soc_p = (th_p - p.theta0_p) / (p.theta100_p - p.theta0_p)
    return V, soc_p, soc_n


def _observables_dot(model: DFNModel, YP):
    """Time derivatives of the observables (the current term is constant on a segment)."""
    V, soc_p, soc_n = _observables(model, YP, 0.0)
    p = model.params
    # _observables subtracts the window offsets; derivatives carry none
    soc_n = soc_n + p.theta0_n / (p.theta100_n - p.theta0_n)
    soc_p = soc_p + p.theta0_p / (p.theta100_p - p.theta0_p)
    return V, soc_p, soc_n


def _cutoff_event(model: DFNModel, I: float):
    p = model.params
    if I > 0:
        return lambda t, y: model.terminal_voltage(y, I) < p.V_min
    if I < 0:
        return lambda t, y: model.terminal_voltage(y, I) > p.V_max
    return None


def _initialize(model, I, y_guess, solver: SolverConfig, t0):
    system = model.dae_system(I)
    mask = system.differential_mask
    if solver.init_method == "newton_alg":
        y0, yp0 = init_newton_algebraic(system, y_guess[mask], y_guess[~mask], t0=t0, config=solver)
    else:
        y0, yp0 = init_single_step(system, y_guess[mask], y_guess[~mask], h_ss=solver.h_ss,
                                   t0=t0, config=solver)
    return system, y0, yp0


def run_profile(params: CellParameters, mesh: Mesh, profile: CurrentProfile, initial_soc: float = 1.0,
                solver: SolverConfig | None = None, initial_state: CellState | None = None,
                snapshot_times: Sequence[float] = ()) -> SimulationResult:
    """Simulate ``profile`` from a rested cell at ``initial_soc``.

    Parameters
    ----------
    params, mesh
        Cell description and discretization.
    profile
        :class:`CC`, :class:`Table` or :class:`HPPCSchedule` (expanded to a table).
    initial_soc
        Initial state of charge; sets uniform stoichiometries through the windows.
    solver
        Integrator settings; defaults to :class:`SolverConfig()`.
    initial_state
        Start from this state instead (its algebraic part is re-initialized).
    snapshot_times
        Times at which the full interpolated state is kept.

    Returns
    -------
    SimulationResult
        Traces on a 1 s grid for CC profiles and at the table timestamps
        otherwise. The run stops early at the voltage cutoff that matches the
        current direction (``termination == "cutoff"``).
    """
    if not 0.0 <= initial_soc <= 1.0:
        raise DomainError(f"initial_soc must lie in [0, 1], got {initial_soc}")
    solver = solver or SolverConfig()
    model = DFNModel(params, mesh)

    if isinstance(profile, HPPCSchedule):
        profile = expand_hppc(profile, params.Q_nom, initial_soc)
    if isinstance(profile, CC):
        I = crate_to_current(profile.c_rate, params.Q_nom, profile.direction)
        t_end = profile.duration()
        times = np.array([0.0, t_end])
        currents = np.array([I, I])
        grid = np.arange(0.0, np.floor(t_end) + 1.0)
        if grid[-1] < t_end:
            grid = np.append(grid, t_end)
    elif isinstance(profile, Table):
        times, currents = profile.times, profile.currents
        grid = times
    else:
        raise ConfigurationError(f"unsupported profile type {type(profile).__name__}")

    if initial_state is not None:
        y = np.array(initial_state.y, dtype=float)
        if y.size != model.layout.size:
            raise ConfigurationError("initial_state does not match the mesh")
    else:
        y = model.equilibrium_state(soc=initial_soc, potentials=False)

    snapshot_times = np.asarray(sorted(snapshot_times), dtype=float)
    out_t, out_V, out_I, out_sp, out_sn = [], [], [], [], []
    snapshots = {}
    termination = "completed"
    t_seg_end = times[0]
    yp = np.zeros_like(y)
    segments = _segments(times, currents)
    for k, (a, b) in enumerate(segments):
        I = float(currents[a])
        t0, t1 = float(times[a]), float(times[b])
        try:
            system, y0, yp0 = _initialize(model, I, y, solver, t0)
        except DFNError as exc:
            raise SimulationError(f"initialization failed in segment {k} at t={t0:.6g} s: {exc}",
                                  segment=k, time=t0) from exc
        event = _cutoff_event(model, I)
        try:
            if t1 > t0:
                traj = solve(system, (t0, t1), y0, yp0, solver, event=event)
            else:  # current change at the final timestamp: only the post-jump sample
                hit = event is not None and event(t0, y0)
                traj = Trajectory(np.array([t0]), y0[None, :], yp0[None, :],
                                  Termination.EVENT_CUTOFF if hit else Termination.REACHED_TFINAL)
        except DFNError as exc:
            raise SimulationError(f"solver failed in segment {k} at t={t0:.6g} s: {exc}",
                                  segment=k, time=t0) from exc
        if traj.termination is Termination.FAILED:
            raise SimulationError(f"solver failed in segment {k}: {traj.message}",
                                  segment=k, time=float(traj.times[-1]))

        t_stop = float(traj.times[-1])
        last = k == len(segments) - 1
        cut = traj.termination is Termination.EVENT_CUTOFF
        # grid points owned by this segment: [t0, t1), plus t1 on the last one
        hi = t_stop if (cut or last) else t1
        inc = cut or last
        sel = (grid >= t0) & ((grid <= hi) if inc else (grid < hi))
        tq = grid[sel]
        if cut and (tq.size == 0 or tq[-1] < t_stop):
            tq = np.append(tq, t_stop)
        if tq.size:
            V, sp_, sn_ = _observables(model, traj.y, I)
            if traj.times.size > 1:
                dV, dsp, dsn = _observables_dot(model, traj.yp)
                out_V.append(CubicHermiteSpline(traj.times, V, dV)(tq))
                out_sp.append(CubicHermiteSpline(traj.times, sp_, dsp)(tq))
                out_sn.append(CubicHermiteSpline(traj.times, sn_, dsn)(tq))
            else:
                out_V.append(np.full(tq.size, V[0]))
                out_sp.append(np.full(tq.size, sp_[0]))
                out_sn.append(np.full(tq.size, sn_[0]))
            out_t.append(tq)
            out_I.append(np.full(tq.size, I))
        ws = snapshot_times[(snapshot_times >= t0) & (snapshot_times <= t_stop)]
        if ws.size:
            if traj.times.size > 1:
                Ys = CubicHermiteSpline(traj.times, traj.y, traj.yp, axis=0)(ws)
            else:
                Ys = np.repeat(traj.y[:1], ws.size, axis=0)
            for ts, ys in zip(ws, Ys):
                snapshots.setdefault(float(ts), CellState(y=ys, yp=np.zeros_like(ys), t=float(ts)))
        y, yp = traj.y[-1], traj.yp[-1]
        t_seg_end = t_stop
        if cut:
            termination = "cutoff"
            break

    if not out_t:
        raise SimulationError("profile produced no output samples")
    return SimulationResult(
        t=np.concatenate(out_t), V=np.concatenate(out_V), I=np.concatenate(out_I),
        SOC_p=np.concatenate(out_sp), SOC_n=np.concatenate(out_sn),
        termination=termination,
        final_state=CellState(y=y.copy(), yp=yp.copy(), t=t_seg_end),
        snapshots=snapshots,
    )
