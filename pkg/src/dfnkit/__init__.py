"""Doyle-Fuller-Newman cell simulation, parameter identification and identifiability analysis."""

__version__ = "0.1.0"

from .dae import DAESystem, SolverConfig, Termination, Trajectory, init_newton_algebraic, init_single_step, solve
from .discretize import Mesh, RadialMethod, build_mesh
from .errors import (AlignmentError, AssemblyError, ConfigurationError, DFNError, DomainError,
                     InitializationError, LoadError, OptimizationError, SaturationError,
                     SimulationError, SolverError)
from .model import CellState, DFNModel, StateLayout
from .params import CellParameters, OCPCurve, lg_m50, ocp_eval
from .protocols import CC, HPPCSchedule, SimulationResult, Table, coulomb_count_soc, crate_to_current, run_profile

__all__ = [
    "__version__", "DAESystem", "SolverConfig", "Termination", "Trajectory", "init_newton_algebraic",
    "init_single_step", "solve", "Mesh", "RadialMethod", "build_mesh", "AlignmentError", "AssemblyError",
    "ConfigurationError", "DFNError", "DomainError", "InitializationError", "LoadError",
    "OptimizationError", "SaturationError", "SimulationError", "SolverError", "CellState", "DFNModel",
    "StateLayout", "CellParameters", "OCPCurve", "lg_m50", "ocp_eval", "CC", "HPPCSchedule",
    "SimulationResult", "Table", "coulomb_count_soc", "crate_to_current", "run_profile",
]
