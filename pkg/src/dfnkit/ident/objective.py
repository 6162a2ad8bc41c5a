"""Composite voltage / SOC error between a simulation and measured data."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import AlignmentError, ConfigurationError
from ..protocols import SimulationResult, coulomb_count_soc


@dataclass(frozen=True)
class ObjectiveBreakdown:
    """Error components; ``J_SOCp`` and ``J_SOCn`` are in percent.

    ``J_tot = J_V + J_SOCp/100 + J_SOCn/100``.
    """

    J_V: float
    J_SOCp: float
    J_SOCn: float
    J_V_mV: float = math.nan
    J_tot: float = math.nan

    def __post_init__(self):
        total = self.J_V + self.J_SOCp / 100.0 + self.J_SOCn / 100.0
        if math.isnan(self.J_tot):
            object.__setattr__(self, "J_tot", total)
        elif not abs(self.J_tot - total) <= 1e-9:
            raise ConfigurationError(f"J_tot {self.J_tot} inconsistent with its components ({total})")
        for name in ("J_V", "J_SOCp", "J_SOCn", "J_V_mV", "J_tot"):
            v = getattr(self, name)
            if v < 0:
                raise ConfigurationError(f"{name} must be nonnegative, got {v}")

    @classmethod
    def penalty(cls, value: float = 1e6) -> "ObjectiveBreakdown":
        """Breakdown assigned to a failed evaluation (all weight on the voltage term)."""
        return cls(J_V=value, J_SOCp=0.0, J_SOCn=0.0, J_V_mV=math.inf)

    def as_dict(self) -> dict:
        return {"J_V": self.J_V, "J_V_mV": self.J_V_mV, "J_SOCp": self.J_SOCp,
                "J_SOCn": self.J_SOCn, "J_tot": self.J_tot}


def objective(sim: SimulationResult, exp, params, soc0: float | None = None) -> ObjectiveBreakdown:
    """Mean absolute voltage and SOC errors of ``sim`` against ``exp``.

    Parameters
    ----------
    sim : SimulationResult
        Already sampled at the experiment timestamps.
    exp : ExperimentData
    params : CellParameters
        Supplies ``Q_nom`` for the coulomb-counted SOC reference.
    soc0 : float, optional
        SOC at the first sample; defaults to the simulated SOC there (mean of
        both electrodes, which coincide for a rested start).
    """
    n = exp.t.size
    if len(sim) != n:
        raise AlignmentError(f"simulation has {len(sim)} samples, experiment has {n}")
    if not np.allclose(sim.t, exp.t, rtol=0, atol=1e-6 * max(1.0, abs(exp.t[-1]))):
        raise AlignmentError("simulation is not sampled at the experiment timestamps")
    if soc0 is None:
        soc0 = 0.5 * (sim.SOC_p[0] + sim.SOC_n[0])
    ref = coulomb_count_soc(exp.t, exp.I, params.Q_nom, soc0)
    dv = np.abs(sim.V - exp.V)
    return ObjectiveBreakdown(
        J_V=float(np.mean(dv / np.abs(exp.V))),
        J_V_mV=float(1000.0 * np.mean(dv)),
        J_SOCp=float(100.0 * np.mean(np.abs(sim.SOC_p - ref))),
        J_SOCn=float(100.0 * np.mean(np.abs(sim.SOC_n - ref))),
    )
