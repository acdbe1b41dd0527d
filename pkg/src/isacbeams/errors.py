"""Exception types shared across the package."""


class IsacError(Exception):
    """Base class for all package-specific errors."""


class NotHermitianError(IsacError):
    """Input matrix is not Hermitian within tolerance."""


class NotPsdError(IsacError):
    """Matrix has an eigenvalue below the allowed negative tolerance."""


class EigConvergenceError(IsacError):
    """Eigendecomposition failed to converge."""


class RowsNotOrthonormalError(IsacError):
    """Rows of the input block are not orthonormal within tolerance."""


class QuadratureUnderflowError(IsacError):
    """Gauss-Hermite weights degenerated to zero."""


class NonzeroMeanError(IsacError):
    """Zero-mean path-loss construction called with a nonzero mean prior."""


class ImaginaryResidueError(IsacError):
    """Trace terms that must be real carry too large an imaginary part."""


class SingularBfimError(IsacError):
    """Information matrix is numerically singular and cannot be inverted."""


class DegenerateDenominatorError(IsacError):
    """Ratio metric evaluated with a nonpositive denominator."""


class UnsupportedScalarizationError(IsacError):
    """Requested scalarization has no conic encoding in this package."""


class ZeroUsefulPowerError(IsacError):
    """A user's covariance block carries no power along its channel."""


class SolverFailureError(IsacError):
    """Conic solve did not produce a usable solution."""


class DegenerateDeltaError(IsacError):
    """Null-vector scaling would zero out a communication beamformer."""


class OrthonormalityLossError(IsacError):
    """Top rows of the compact factor drifted from orthonormality."""


class StalledReductionError(IsacError):
    """A reduction step that should apply kept failing numerically."""


class ConditionViolatedError(IsacError):
    """Closed-form two-beam analysis requested outside its validity region."""


class GridExhaustedError(IsacError):
    """More targets requested than available grid directions."""
