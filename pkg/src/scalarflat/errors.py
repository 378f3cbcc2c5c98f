"""Exception hierarchy shared by all modules."""


class GluingError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 1


class ValidationError(GluingError, ValueError):
    exit_code = 2


class ResolutionError(ValidationError):
    """Grid too coarse for the cutoff bands or the curvature stencil."""


class SupportError(GluingError, ValueError):
    exit_code = 2


class DomainError(GluingError, ValueError):
    """The conformal factor 1 + v left the positive cone."""

    exit_code = 3


class DegenerateStateError(GluingError):
    exit_code = 3


class NoContractionError(GluingError):
    """Measured first-pass error ratio is not below 1."""

    exit_code = 3


class ConvergenceError(GluingError):
    exit_code = 3


class AssumptionViolation(GluingError):
    """A hypothesis of the construction fails (e.g. Ricci-flat caps)."""

    exit_code = 4
