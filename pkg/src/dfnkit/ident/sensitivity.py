"""Local sensitivity of voltage / SOC traces and parameter correlation."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import ConfigurationError, DFNError, DomainError

log = logging.getLogger(__name__)


@dataclass
class SensitivityReport:
    """Sensitivity indices and raw traces of a set of parameters.

    ``traces[name]`` holds ``(s_V, s_SOCp, s_SOCn)`` on the common time grid
    ``t``; entries past the end of a perturbed run are NaN.
    """

    names: list
    S: dict
    t: np.ndarray = field(repr=False)
    traces: dict = field(repr=False)
    delta: dict = field(default_factory=dict)
    failed: dict = field(default_factory=dict)
    corr: np.ndarray | None = field(default=None, repr=False)
    beta_LSA: float | None = None
    beta_corr: float | None = None
    LSA_identifiable: list = field(default_factory=list)
    corr_identifiable: list = field(default_factory=list)

    def concatenated(self, name):
        return np.concatenate(self.traces[name])

    def to_dict(self) -> dict:
        def clean(a):
            return [None if not np.isfinite(v) else float(v) for v in np.ravel(a)]

        return {
            "names": list(self.names),
            "S": {n: (None if not np.isfinite(v) else float(v)) for n, v in self.S.items()},
            "delta": dict(self.delta),
            "failed": dict(self.failed),
            "beta_LSA": self.beta_LSA,
            "beta_corr": self.beta_corr,
            "LSA_identifiable": list(self.LSA_identifiable),
            "corr_identifiable": list(self.corr_identifiable),
            "correlation": None if self.corr is None else [clean(row) for row in self.corr],
        }


def _default_simulate(profile, mesh, solver, initial_soc):
    from ..protocols import run_profile

    def simulate(params):
        return run_profile(params, mesh, profile, initial_soc, solver)

    return simulate


def lsa(params, names, profile=None, delta=0.05, mesh=None, solver=None, initial_soc: float = 1.0,
        simulate: Callable | None = None) -> SensitivityReport:
    """Central-difference sensitivity of the simulated traces to each parameter.

    For each name the model is run at ``p*(1+delta)`` and ``p*(1-delta)``:

    * ``s_V = (V+ - V-) / (2*delta*V_nom)``
    * ``s_SOC = (SOC+ - SOC-) / (2*delta)`` for each electrode

    and ``S`` is the RMS of the three traces concatenated. Traces are compared
    on the nominal output grid where all three runs have data.

    Parameters
    ----------
    delta : float or dict
        Relative perturbation, optionally per name.
    simulate : callable, optional
        ``params -> SimulationResult``; by default ``run_profile`` with the
        given profile, mesh, solver and initial SOC.
    """
    names = list(names)
    if len(set(names)) != len(names):
        raise ConfigurationError("parameter names must be unique")
    deltas = {n: float(delta[n] if isinstance(delta, dict) else delta) for n in names}
    for n in names:
        if not deltas[n] > 0:
            raise DomainError(f"delta for {n} must be positive")
        v = getattr(params, n, None)
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ConfigurationError(f"{n!r} is not a numeric cell parameter")
        if not v > 0:
            raise DomainError(f"{n} must be positive for a relative perturbation, got {v}")
    if simulate is None:
        if profile is None or mesh is None:
            raise ConfigurationError("lsa needs a profile and a mesh, or a simulate callable")
        simulate = _default_simulate(profile, mesh, solver, initial_soc)

    nominal = simulate(params)
    t = np.asarray(nominal.t)
    S, traces, failed = {}, {}, {}
    for n in names:
        v, dl = getattr(params, n), deltas[n]
        try:
            plus = simulate(params.replace(**{n: v * (1 + dl)}))
            minus = simulate(params.replace(**{n: v * (1 - dl)}))
        except (DFNError, ValueError, ArithmeticError) as exc:
            failed[n] = f"{type(exc).__name__}: {exc}"
            S[n] = np.nan
            log.warning("sensitivity of %s failed: %s", n, exc)
            continue
        end = min(plus.t[-1], minus.t[-1], t[-1])
        ok = t <= end + 1e-9

        def at(res, y):
            out = np.full(t.size, np.nan)
            out[ok] = np.interp(t[ok], res.t, y)
            return out

        s_v = (at(plus, plus.V) - at(minus, minus.V)) / (2 * dl * nominal.V)
        s_p = (at(plus, plus.SOC_p) - at(minus, minus.SOC_p)) / (2 * dl)
        s_n = (at(plus, plus.SOC_n) - at(minus, minus.SOC_n)) / (2 * dl)
        traces[n] = (s_v, s_p, s_n)
        flat = np.concatenate([s_v[ok], s_p[ok], s_n[ok]])
        S[n] = float(np.sqrt(np.mean(flat**2)))
    report = SensitivityReport(names=names, S=S, t=t, traces=traces, delta=deltas, failed=failed)
    if len(traces) >= 2:
        report.corr = correlation_matrix(report)
    return report


def _pearson(a, b):
    both = np.isfinite(a) & np.isfinite(b)
    a, b = a[both], b[both]
    if a.size < 2:
        return np.nan
    a = a - a.mean()
    b = b - b.mean()
    na, nb = np.sqrt(a @ a), np.sqrt(b @ b)
    if na == 0 or nb == 0:
        return np.nan
    return float(np.clip((a @ b) / (na * nb), -1.0, 1.0))


def correlation_matrix(report: SensitivityReport) -> np.ndarray:
    """Pearson correlation of the concatenated raw traces, in ``report.names`` order.

    Failed parameters get NaN rows; pairs involving a zero-variance trace are
    NaN off the diagonal. The diagonal is 1.
    """
    names = report.names
    ok = [n for n in names if n in report.traces]
    if len(ok) < 2:
        raise ConfigurationError("correlation needs at least two parameters with traces")
    k = len(names)
    C = np.full((k, k), np.nan)
    flat = {n: report.concatenated(n) for n in ok}
    for i, a in enumerate(names):
        C[i, i] = 1.0
        if a not in flat:
            continue
        for j in range(i + 1, k):
            b = names[j]
            if b in flat:
                C[i, j] = C[j, i] = _pearson(flat[a], flat[b])
    return C


def _zero_variance(x):
    x = x[np.isfinite(x)]
    return x.size < 2 or np.ptp(x) == 0


def identifiable_set(report: SensitivityReport, beta_LSA: float, beta_corr: float):
    """Names above the sensitivity threshold, then a greedy decorrelation pass.

    Returns
    -------
    (LSA_identifiable, corr_identifiable)
        The first is sorted by descending ``S``. The second keeps a name only
        when ``|corr|`` with every name kept before it is below ``beta_corr``;
        names with a zero-variance trace (undefined correlation) are left out
        unless the filter is disabled with ``beta_corr == 1``.
    """
    if not beta_LSA > 0 or not 0 < beta_corr <= 1:
        raise ConfigurationError("need beta_LSA > 0 and 0 < beta_corr <= 1")
    S = report.S
    ranked = sorted((n for n in report.names if np.isfinite(S.get(n, np.nan)) and S[n] > beta_LSA),
                    key=lambda n: (-S[n], report.names.index(n)))
    C = report.corr
    if C is None and len(report.traces) >= 2:
        C = correlation_matrix(report)
    idx = {n: i for i, n in enumerate(report.names)}
    kept = []
    for n in ranked:
        if beta_corr >= 1.0:
            kept.append(n)
            continue
        if n in report.traces and _zero_variance(report.concatenated(n)):
            continue
        if C is None:
            kept.append(n)
            continue
        if all(abs(C[idx[n], idx[m]]) < beta_corr for m in kept):
            kept.append(n)
    report.beta_LSA, report.beta_corr = beta_LSA, beta_corr
    report.LSA_identifiable, report.corr_identifiable = ranked, kept
    return ranked, kept
