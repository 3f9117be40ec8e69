"""Exception hierarchy. The CLI maps these onto exit codes: user/validation
problems exit 3, resonant or singular problems exit 2, numeric failures 1."""


class QuadlagError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(QuadlagError, ValueError):
    """Bad arguments or data violating a constructor invariant."""


class AlignmentError(InvalidArgumentError):
    """A requested time does not sit on the grid."""


class SingularCoefficientError(InvalidArgumentError):
    """P (or Q) is singular where a solver needs its inverse."""


class UnsupportedConfigurationError(InvalidArgumentError):
    """A combination the library deliberately does not handle."""


class ConfigError(InvalidArgumentError):
    """Malformed CLI configuration."""


class ResonantProblemError(QuadlagError):
    """Boundary problem without a unique solution; carries the margin."""

    def __init__(self, message, margin=None):
        super().__init__(message)
        self.margin = margin


class ResonantDiscreteProblemError(ResonantProblemError):
    pass


class ResonantContinuousProblemError(ResonantProblemError):
    pass


class NumericFailureError(QuadlagError):
    """An iterative numeric method failed to converge."""


class NotDiagonalizableError(NumericFailureError):
    """Matrix function requested for a defective or ill-conditioned matrix."""


class SolventExtractionError(NumericFailureError):
    """No eigenvalue partition of the linearization yields a solvent."""


class DegenerateSpectrumError(NumericFailureError):
    """Modal expansion requested with clustered or repeated eigenvalues."""


class SchemeUnstableError(NumericFailureError):
    """Discretization parameters push eigenvalues off the unit circle."""
