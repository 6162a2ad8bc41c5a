"""Variable-step BDF (orders 1-2) integrator for index-1 DAEs F(t, y, y') = 0.

Newton iterations use a finite-difference iteration matrix dF/dy + alpha*dF/dy'
built column-group-wise from a structural sparsity pattern, and factorized
with a sparse LU. Two consistent-initialization strategies are provided.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, DomainError, InitializationError, SolverError

log = logging.getLogger(__name__)

_EPS = np.finfo(float).eps


@dataclass
class DAESystem:
    """Residual function with its differential/algebraic partition.

    ``repair`` is an optional hook ``(t, y) -> y`` that returns a state with
    the algebraic entries replaced by a usable guess; it is only consulted
    when the residual cannot be evaluated at a user-supplied guess.
    """

    residual: Callable
    differential_mask: np.ndarray
    sparsity: Optional[sp.spmatrix] = None
    repair: Optional[Callable] = None

    def __post_init__(self):
        self.differential_mask = np.asarray(self.differential_mask, dtype=bool)
        if self.sparsity is not None:
            self.sparsity = sp.csc_matrix(self.sparsity)
            if self.sparsity.shape != (self.dimension, self.dimension):
                raise ConfigurationError("sparsity pattern does not match the system dimension")

    @property
    def dimension(self) -> int:
        return self.differential_mask.size

    def __call__(self, t, y, yp):
        r = self.residual(t, y, yp)
        if r.shape != (self.dimension,):
            raise ConfigurationError(f"residual returned shape {r.shape}, expected ({self.dimension},)")
        return r


@dataclass(frozen=True)
class SolverConfig:
    rel_tol: float = 1e-5
    abs_tol: float = 1e-6
    h_init: float = 1e-3
    h_max: float = np.inf
    h_min: float = 1e-12
    max_newton_iters: int = 5
    max_order: int = 2
    newton_tol: float = 1e-7
    init_method: str = "single_step"
    h_ss: float = 1e-6
    init_max_iters: int = 200
    event_tol: float = 1e-6
    max_steps: int = 100000

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0 or self.newton_tol <= 0:
            raise ConfigurationError("tolerances must be positive")
        if not 0 < self.h_init <= self.h_max:
            raise ConfigurationError("need 0 < h_init <= h_max")
        if self.max_order not in (1, 2):
            raise ConfigurationError("max_order must be 1 or 2")
        if self.init_method not in ("single_step", "newton_alg"):
            raise ConfigurationError(
                f"init_method must be 'single_step' or 'newton_alg', got {self.init_method!r}")
        if self.h_ss <= 0:
            raise ConfigurationError("h_ss must be positive")


class Termination(str, enum.Enum):
    REACHED_TFINAL = "reached_tfinal"
    EVENT_CUTOFF = "event_cutoff"
    FAILED = "failed"


@dataclass
class Trajectory:
    times: np.ndarray
    y: np.ndarray
    yp: np.ndarray
    termination: Termination
    message: str = ""
    stats: dict = field(default_factory=dict)

    @property
    def states(self):
        from .model import CellState

        return [CellState(y=yi, yp=ypi, t=ti) for ti, yi, ypi in zip(self.times, self.y, self.yp)]


# ---------------------------------------------------------------- Jacobian
def color_columns(pattern: sp.spmatrix) -> np.ndarray:
    """Greedy grouping of columns that share no structurally nonzero row."""
    P = sp.csc_matrix(pattern, dtype=bool).astype(np.int8)
    adj = (P.T @ P).tolil()
    n = P.shape[1]
    colors = -np.ones(n, dtype=int)
    for j in range(n):
        taken = {colors[k] for k in adj.rows[j] if colors[k] >= 0}
        c = 0
        while c in taken:
            c += 1
        colors[j] = c
    return colors


class _FDJacobian:
    def __init__(self, system: DAESystem):
        n = system.dimension
        pattern = system.sparsity if system.sparsity is not None else sp.csc_matrix(np.ones((n, n)))
        coo = sp.coo_matrix(pattern)
        self.rows, self.cols = coo.row, coo.col
        self.shape = (n, n)
        self.colors = color_columns(pattern)
        self.groups = [np.flatnonzero(self.colors == c) for c in range(self.colors.max() + 1)]
        self.system = system

    def __call__(self, t, y, yp, alpha, r0, y_weight=1.0):
        """Matrix y_weight*dF/dy + alpha*dF/dyp at (t, y, yp)."""
        delta = np.sqrt(_EPS) * np.maximum(np.abs(y), 1.0)
        D = np.empty((len(self.groups), y.size))
        for c, cols in enumerate(self.groups):
            y2 = y.copy()
            yp2 = yp.copy()
            y2[cols] += y_weight * delta[cols]
            yp2[cols] += alpha * delta[cols]
            D[c] = self.system(t, y2, yp2) - r0
        vals = D[self.colors[self.cols], self.rows] / delta[self.cols]
        return sp.csc_matrix((vals, (self.rows, self.cols)), shape=self.shape)


def _factor(J):
    try:
        with np.errstate(all="ignore"):
            lu = spla.splu(sp.csc_matrix(J))
    except RuntimeError as exc:  # exactly singular
        raise np.linalg.LinAlgError(str(exc)) from None
    return lu


# ------------------------------------------------------------------- solve
class _Integrator:
    def __init__(self, system, config, event):
        self.sys = system
        self.cfg = config
        self.event = event
        self.jac = _FDJacobian(system)
        self.mask = system.differential_mask
        self.lu = None
        self.alpha_lu = None
        self.stats = {"steps": 0, "rejected": 0, "newton_fail": 0, "jac_evals": 0, "res_evals": 0}

    def _weights(self, y):
        return 1.0 / (self.cfg.rel_tol * np.abs(y) + self.cfg.abs_tol)

    def _refresh(self, t, y, yp, alpha, r0):
        J = self.jac(t, y, yp, alpha, r0)
        self.stats["jac_evals"] += 1
        self.stats["res_evals"] += len(self.jac.groups)
        self.lu = _factor(J)
        self.alpha_lu = alpha

    def newton(self, t, y_pred, alpha, beta):
        """Solve F(t, y, alpha*y + beta) = 0 starting at ``y_pred``; None on failure."""
        cfg = self.cfg
        fresh = False
        if self.lu is None or abs(alpha / self.alpha_lu - 1.0) > 0.3:
            fresh = True
        for attempt in range(2):
            y = y_pred.copy()
            try:
                r = self.sys(t, y, alpha * y + beta)
                self.stats["res_evals"] += 1
                if fresh:
                    self._refresh(t, y, alpha * y + beta, alpha, r)
                prev = np.inf
                for _ in range(cfg.max_newton_iters):
                    rmax = np.max(np.abs(r))
                    if not np.isfinite(rmax):
                        break
                    if rmax <= cfg.newton_tol:
                        return y, r
                    dy = self.lu.solve(r)
                    # stale matrices were built for a different alpha
                    if self.alpha_lu != alpha:
                        dy *= 2.0 / (1.0 + alpha / self.alpha_lu)
                    y = y - dy
                    r = self.sys(t, y, alpha * y + beta)
                    self.stats["res_evals"] += 1
                    if rmax > 0.9 * prev and np.max(np.abs(r)) > rmax:
                        break
                    prev = rmax
                if np.max(np.abs(r)) <= cfg.newton_tol:
                    return y, r
            except (DomainError, FloatingPointError, np.linalg.LinAlgError, ValueError):
                pass
            self.stats["newton_fail"] += 1
            if fresh:
                return None
            fresh = True
        return None

    @staticmethod
    def coefficients(order, h, h_prev, y_n, y_prev):
        if order == 1:
            return 1.0 / h, -y_n / h
        w = h / h_prev
        alpha = (1.0 + 2.0 * w) / ((1.0 + w) * h)
        beta = (-(1.0 + w) * y_n + w * w / (1.0 + w) * y_prev) / h
        return alpha, beta

    @staticmethod
    def predict(order, h, h_prev, y_n, yp_n, y_prev):
        if order == 1:
            return y_n + h * yp_n
        c = (y_prev - y_n + yp_n * h_prev) / h_prev**2
        return y_n + h * yp_n + c * h * h

    def step(self, t, h, order, y_n, yp_n, y_prev, h_prev):
        """One BDF step; returns (y_new, yp_new, err) or None when Newton fails."""
        alpha, beta = self.coefficients(order, h, h_prev, y_n, y_prev)
        y_pred = self.predict(order, h, h_prev, y_n, yp_n, y_prev)
        out = self.newton(t + h, y_pred, alpha, beta)
        if out is None:
            return None
        y_new, _ = out
        const = 0.5 if order == 1 else 0.4
        e = const * (y_new - y_pred)
        w = self._weights(y_new)[self.mask]
        err = float(np.sqrt(np.mean((e[self.mask] * w) ** 2))) if self.mask.any() else 0.0
        return y_new, alpha * y_new + beta, err


def solve(system: DAESystem, t_span, y0, yp0, config: SolverConfig = None,
          event: Callable | None = None) -> Trajectory:
    """Integrate from consistent ``(y0, yp0)`` over ``t_span``.

    ``event(t, y) -> bool`` is checked after each accepted step; when it
    turns true the crossing time is bracketed by bisection to
    ``config.event_tol`` and integration stops at the first state for which
    the predicate holds.
    """
    cfg = config or SolverConfig()
    t0, tf = float(t_span[0]), float(t_span[1])
    if not tf > t0:
        raise ConfigurationError("t_span must be increasing")
    y = np.array(y0, dtype=float)
    yp = np.array(yp0, dtype=float)
    r0 = system(t0, y, yp)
    if np.max(np.abs(r0)) > cfg.newton_tol:
        worst = int(np.argmax(np.abs(r0)))
        raise InitializationError(
            f"inconsistent initial conditions: residual {np.abs(r0[worst]):.3e} at index {worst}")

    integ = _Integrator(system, cfg, event)
    times, ys, yps = [t0], [y.copy()], [yp.copy()]
    if event is not None and event(t0, y):
        return Trajectory(np.array(times), np.array(ys), np.array(yps), Termination.EVENT_CUTOFF,
                          "event active at initial time", integ.stats)

    t = t0
    h = min(cfg.h_init, cfg.h_max, tf - t0)
    order = 1
    y_prev, h_prev = None, None
    termination, message = Termination.REACHED_TFINAL, ""
    while t < tf:
        if integ.stats["steps"] >= cfg.max_steps:
            termination, message = Termination.FAILED, f"max_steps reached at t={t:.6g}"
            break
        if t + h >= tf or tf - (t + h) < 1e-10 * max(1.0, abs(tf)):
            h = tf - t
        res = integ.step(t, h, order, y, yp, y_prev, h_prev)
        if res is None:
            integ.stats["rejected"] += 1
            h *= 0.25
            if h < cfg.h_min:
                r = system(t, y, yp)
                worst = int(np.argmax(np.abs(r)))
                termination = Termination.FAILED
                message = (f"Newton failed at t={t:.9g} after reducing the step below h_min "
                           f"(step {integ.stats['steps']}, worst residual index {worst})")
                break
            continue
        y_new, yp_new, err = res
        if err > 1.0:
            integ.stats["rejected"] += 1
            h *= float(np.clip(0.9 * err ** (-1.0 / (order + 1)), 0.2, 0.9))
            if h < cfg.h_min:
                termination = Termination.FAILED
                message = f"error test failed with h below h_min at t={t:.9g}"
                break
            continue

        if event is not None and event(t + h, y_new):
            lo, hi = 0.0, h
            y_hi, yp_hi = y_new, yp_new
            while hi - lo > cfg.event_tol:
                mid = 0.5 * (lo + hi)
                out = integ.step(t, mid, order, y, yp, y_prev, h_prev)
                if out is None:
                    out = integ.step(t, mid, 1, y, yp, None, None)
                if out is None:
                    break
                if event(t + mid, out[0]):
                    hi, y_hi, yp_hi = mid, out[0], out[1]
                else:
                    lo = mid
            t += hi
            times.append(t)
            ys.append(y_hi)
            yps.append(yp_hi)
            integ.stats["steps"] += 1
            termination = Termination.EVENT_CUTOFF
            break

        y_prev, h_prev = y, h
        y, yp = y_new, yp_new
        t = t + h
        times.append(t)
        ys.append(y.copy())
        yps.append(yp.copy())
        integ.stats["steps"] += 1
        factor = 2.0 if err == 0 else float(np.clip(0.9 * err ** (-1.0 / (order + 1)), 0.2, 2.0))
        order = cfg.max_order
        h = min(h * factor, cfg.h_max)
    return Trajectory(np.array(times), np.array(ys), np.array(yps), termination, message, integ.stats)


# ---------------------------------------------------------- initialization
def _damped_newton(fun, x0, jac, tol, max_iters, what):
    """Newton with backtracking on the residual max-norm."""
    x = x0.copy()
    r = fun(x)
    for _ in range(max_iters):
        rn = np.max(np.abs(r))
        if rn <= tol:
            return x, r
        J = jac(x, r)
        try:
            dx = _factor(J).solve(r)
        except np.linalg.LinAlgError:
            raise
        lam = 1.0
        while True:
            x_try = x - lam * dx
            try:
                r_try = fun(x_try)
                if np.all(np.isfinite(r_try)) and (np.max(np.abs(r_try)) < rn or lam < 1e-3):
                    break
            except (DomainError, FloatingPointError, ValueError):
                pass
            lam *= 0.5
            if lam < 1e-6:
                raise InitializationError(f"{what}: line search failed (residual {rn:.3e})")
        x, r = x_try, r_try
    if np.max(np.abs(r)) <= tol:
        return x, r
    raise InitializationError(
        f"{what}: Newton did not converge in {max_iters} iterations "
        f"(residual {np.max(np.abs(r)):.3e})")


def _assemble(system, y0_diff, alg_guess):
    mask = system.differential_mask
    y = np.empty(system.dimension)
    y[mask] = np.asarray(y0_diff, dtype=float)
    y[~mask] = np.asarray(alg_guess, dtype=float)
    return y


def _residual_norm(system, t0, y, yp):
    try:
        with np.errstate(all="ignore"):
            r = system(t0, y, yp)
    except (DomainError, FloatingPointError, ValueError):
        return np.inf
    n = np.max(np.abs(r))
    return n if np.isfinite(n) else np.inf


def _evaluable_start(system, t0, y, yp):
    """The guess, or the system's repaired guess when that has the smaller residual."""
    r_guess = _residual_norm(system, t0, y, yp)
    if system.repair is None:
        if not np.isfinite(r_guess):
            raise InitializationError("residual cannot be evaluated at the initial guess")
        return y
    y_rep = system.repair(t0, y)
    r_rep = _residual_norm(system, t0, y_rep, yp)
    if r_rep < r_guess:
        log.debug("using repaired algebraic guess (residual %.3e -> %.3e)", r_guess, r_rep)
        return y_rep
    if not np.isfinite(r_guess):
        raise InitializationError("residual cannot be evaluated at the initial guess")
    return y


def init_single_step(system: DAESystem, y0_diff, alg_guess, h_ss: float = 1e-6, t0: float = 0.0,
                     config: SolverConfig = None, tol: float = 1e-9):
    """Consistent ``(y0, yp0)`` from one backward-Euler step of length ``h_ss``.

    The step relaxes the algebraic unknowns onto the constraint manifold; the
    given differential values are kept and ``yp0`` follows from the step.
    """
    cfg = config or SolverConfig()
    if not h_ss > 0:
        raise ConfigurationError("h_ss must be positive")
    mask = system.differential_mask
    y_start = _assemble(system, y0_diff, alg_guess)
    y_start = _evaluable_start(system, t0, y_start, np.zeros_like(y_start))
    alpha = 1.0 / h_ss
    jac = _FDJacobian(system)

    def fun(y):
        return system(t0, y, alpha * (y - y_start))

    def J(y, r):
        return jac(t0, y, alpha * (y - y_start), alpha, r)

    try:
        y1, _ = _damped_newton(fun, y_start, J, tol, cfg.init_max_iters, "single-step initialization")
    except (InitializationError, np.linalg.LinAlgError) as exc:
        raise InitializationError(f"{exc}; try init_method='newton_alg'") from None
    y0 = y_start.copy()
    y0[~mask] = y1[~mask]
    yp0 = np.zeros_like(y0)
    yp0[mask] = alpha * (y1 - y_start)[mask]
    # the algebraic values belong to t0 + h_ss; one short Newton pass on the
    # algebraic rows moves them back onto the constraint at the given y0_diff
    r = system(t0, y0, yp0)
    if np.max(np.abs(r[~mask])) > tol:
        y0 = _solve_algebraic(system, t0, y0, yp0, jac, tol, 5, "single-step initialization")
    return y0, _consistent_yp(system, t0, y0, yp0, jac, tol)


def init_newton_algebraic(system: DAESystem, y0_diff, alg_guess, t0: float = 0.0,
                          config: SolverConfig = None, tol: float = 1e-9):
    """Consistent ``(y0, yp0)`` by Newton on the algebraic rows at fixed differential values."""
    cfg = config or SolverConfig()
    mask = system.differential_mask
    alg = ~mask
    y = _assemble(system, y0_diff, alg_guess)
    if not np.all(np.isfinite(y[mask])):
        raise InitializationError("differential initial values must be finite")
    zeros = np.zeros_like(y)
    y = _evaluable_start(system, t0, y, zeros)
    jac = _FDJacobian(system)
    y = _solve_algebraic(system, t0, y, zeros, jac, tol, cfg.init_max_iters,
                         "algebraic initialization")
    return y, _consistent_yp(system, t0, y, zeros, jac, tol)


def _consistent_yp(system, t0, y, yp, jac, tol):
    """Refine yp on differential rows so that F(t0, y, yp) = 0 there."""
    mask = system.differential_mask
    idx_d = np.flatnonzero(mask)
    yp = yp.copy()
    r = system(t0, y, yp)
    for _ in range(10):
        if np.max(np.abs(r[mask])) <= tol:
            break
        Jp = jac(t0, y, yp, 1.0, r, y_weight=0.0).tocsc()[idx_d][:, idx_d]
        yp[mask] -= _factor(Jp).solve(r[mask])
        r = system(t0, y, yp)
    return yp


def _solve_algebraic(system, t0, y, yp, jac, tol, max_iters, what):
    """Newton over the algebraic unknowns with differential values held fixed."""
    alg = ~system.differential_mask
    idx_alg = np.flatnonzero(alg)
    y = y.copy()

    def fun_alg(z):
        yy = y.copy()
        yy[alg] = z
        return system(t0, yy, yp)[alg]

    def J_alg(z, r):
        yy = y.copy()
        yy[alg] = z
        full = system(t0, yy, yp)
        return jac(t0, yy, yp, 0.0, full).tocsc()[idx_alg][:, idx_alg]

    try:
        z, _ = _damped_newton(fun_alg, y[alg], J_alg, tol, max_iters, what)
    except np.linalg.LinAlgError:
        Ja = J_alg(y[alg], None).toarray()
        cond = np.linalg.cond(Ja)
        raise InitializationError(
            f"{what}: algebraic subsystem Jacobian is singular (condition estimate {cond:.3e})"
        ) from None
    y[alg] = z
    return y
