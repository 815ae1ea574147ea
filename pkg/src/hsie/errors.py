"""Exception types raised across the package."""


class HsieError(Exception):
    """Base class for all package errors."""


class SingularMatrixError(HsieError):
    """Raised when a factorization meets a (numerically) zero pivot."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class SingularShiftError(SingularMatrixError):
    """The shift of a shift-and-invert iteration hits the pencil spectrum."""


class SingularFrequencyError(SingularMatrixError):
    """The scattering operator is singular at the requested frequency."""


class ConvergenceError(HsieError):
    """An iterative procedure stopped before meeting its tolerance."""

    def __init__(self, message, iterations=None, estimate=None):
        super().__init__(message)
        self.iterations = iterations
        self.estimate = estimate


class DegenerateCurveError(HsieError):
    """The explicit curve parameterization is undefined at the requested point."""


class NotAdmissibleError(HsieError):
    """Pole parameters violate the admissibility inequalities."""


class SeparationError(HsieError):
    """No homotopy parameter separates outgoing from incoming wavenumbers."""

    def __init__(self, message, violating=()):
        super().__init__(message)
        self.violating = list(violating)


class DegenerateRootError(HsieError):
    """A dispersion root is (nearly) double, so its group velocity vanishes."""


class DegenerateFrequencyError(HsieError):
    """The frequency is too close to a zero-group-velocity or cut-on frequency."""


class ClassificationError(HsieError):
    """A wavenumber does not have the classification an operation requires."""


class RootFindingError(HsieError):
    """Argument-principle root counting failed after all retries."""


class MeshError(HsieError):
    """Invalid block mesh, boundary tagging or element geometry."""


class CouplingError(HsieError):
    """A waveguide port does not match the interior trace space."""


class ConfigError(HsieError):
    """Invalid or inconsistent run configuration."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
