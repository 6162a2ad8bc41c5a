"""Parameter identification (PSO) and identifiability analysis."""
from .objective import ObjectiveBreakdown, objective
from .problem import IdentificationProblem
from .pso import ParameterSpace, PSOConfig, PSOHistory, PSOResult, Scale, bounds_from_pct, pso_optimize
from .sensitivity import SensitivityReport, correlation_matrix, identifiable_set, lsa

__all__ = [
    "ObjectiveBreakdown", "objective", "IdentificationProblem", "ParameterSpace", "PSOConfig",
    "PSOHistory", "PSOResult", "Scale", "bounds_from_pct", "pso_optimize", "SensitivityReport",
    "correlation_matrix", "identifiable_set", "lsa",
]
