"""Exception hierarchy.

The CLI maps `ModelValidationError` to exit code 2 and `SolverError` to exit
code 3; everything else deriving from `ChemfloodError` is a usage problem.
"""


class ChemfloodError(Exception):
    pass


class DomainError(ChemfloodError, ValueError):
    """Arguments outside the closed unit square or otherwise out of range."""


class ModelValidationError(ChemfloodError):
    """A model fails the structural assumptions the solvers rely on."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DegenerateDataError(ModelValidationError):
    pass


class AssumptionViolation(ModelValidationError):
    """Raised mid-solve when a model turns out to break (F3)/(F4) geometry."""


class SolverError(ChemfloodError):
    pass


class GeometryError(SolverError):
    pass


class NoTypeIIError(SolverError):
    pass


class UnsupportedPortraitError(SolverError):
    pass


class ManifoldLaunchError(SolverError):
    pass


class ConnectionNotFoundError(SolverError):
    pass


class ConsistencyError(SolverError):
    pass


class AssemblyError(SolverError):
    def __init__(self, message, speeds=None):
        super().__init__(message)
        self.speeds = speeds


class StiffnessError(SolverError):
    """Explicit integrator exhausted its step budget."""


class InstabilityError(SolverError):
    pass


class InconclusiveRunError(SolverError):
    pass
