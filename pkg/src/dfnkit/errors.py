"""Exception hierarchy shared across the package."""


class DFNError(Exception):
    """Base class for all errors raised by dfnkit."""


class ConfigurationError(DFNError, ValueError):
    pass


class DomainError(DFNError, ValueError):
    """An input lies outside the domain where a function is defined."""


class SaturationError(DomainError):
    """Particle surface concentration reached 0 or the maximum concentration."""


class AssemblyError(DFNError):
    pass


class SolverError(DFNError):
    pass


class InitializationError(SolverError):
    pass


class SimulationError(DFNError):
    """Wraps a solver or initialization failure with protocol context."""

    def __init__(self, message, segment=None, time=None):
        super().__init__(message)
        self.segment = segment
        self.time = time


class OptimizationError(DFNError):
    pass


class LoadError(DFNError):
    pass


class AlignmentError(DFNError):
    pass
