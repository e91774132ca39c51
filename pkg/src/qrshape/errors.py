"""Exception hierarchy and warnings shared across the package."""


class QRShapeError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(QRShapeError, ValueError):
    """Inputs have inconsistent or unsupported dimensions."""


class DomainError(QRShapeError, ValueError):
    """A numeric argument lies outside the domain of the operation."""


class DegenerateConfigurationError(QRShapeError, ValueError):
    """A landmark configuration is rank deficient (a probability-zero event
    for continuous data, but the library must still fail cleanly)."""


class DegenerateSizeError(DegenerateConfigurationError):
    """A size-and-shape matrix has zero size."""


class UnsupportedModelError(QRShapeError, ValueError):
    """The requested generator/model combination is not implemented."""


class UnsupportedCaseError(QRShapeError, ValueError):
    """A parameter combination the theory does not cover (for example the
    reflection-excluded densities with a full-rank mean)."""


class NumericsError(QRShapeError, ArithmeticError):
    """A numerical routine (quadrature, eigensolve) failed to converge."""


class SeriesConvergenceWarning(RuntimeWarning):
    """A truncated series hit its maximum degree before meeting tolerance."""
