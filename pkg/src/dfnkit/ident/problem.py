"""Objective evaluation for identification runs against measured data."""
from __future__ import annotations

from dataclasses import dataclass

from ..dae import SolverConfig
from ..discretize import Mesh
from ..io import ExperimentData, resample_to_experiment
from ..params import CellParameters
from ..protocols import Table, run_profile
from .objective import ObjectiveBreakdown, objective


@dataclass(frozen=True)
class IdentificationProblem:
    """Simulate the measured current profile and score it against the measured voltage.

    Instances are picklable so that evaluations can run in worker processes.
    A simulation that reaches its voltage cutoff before the data ends is
    extended by holding its last values.
    """

    base: CellParameters
    mesh: Mesh
    experiment: ExperimentData
    initial_soc: float = 1.0
    solver: SolverConfig = SolverConfig()

    def simulate(self, values: dict | None = None):
        params = self.base.replace(**values) if values else self.base
        exp = self.experiment
        sim = run_profile(params, self.mesh, Table(exp.t, exp.I), self.initial_soc, self.solver)
        return params, resample_to_experiment(sim, exp, extend="hold")

    def __call__(self, values: dict) -> ObjectiveBreakdown:
        params, sim = self.simulate(values)
        return objective(sim, self.experiment, params, soc0=self.initial_soc)
