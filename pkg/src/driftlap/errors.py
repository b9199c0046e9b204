"""Exception hierarchy shared by all driftlap modules."""


class DriftlapError(Exception):
    """Base class for every error raised by this package."""


class MeshError(DriftlapError):
    pass


class SizeLimitError(MeshError):
    pass


class InvalidGridError(MeshError):
    pass


class OFFParseError(MeshError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"{message} at line {line}"
        super().__init__(message)
        self.line = line


class DegenerateGeometryError(MeshError):
    pass


class AssemblyError(DriftlapError):
    pass


class ConvergenceError(DriftlapError):
    """Iterative eigensolver ran out of budget.

    ``residuals`` holds the best relative residuals reached.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class ResolutionError(DriftlapError):
    pass


class RepresentationError(DriftlapError):
    pass


class StepRestrictionError(DriftlapError):
    pass


class BoundUnavailableError(DriftlapError):
    pass
