"""Exception hierarchy for the mmn package.

Every error raised intentionally by library code derives from
:class:`MmnError`, so callers can catch one type.  Numerical failures
(quadrature, root finding, degenerate EM weights) are distinguished from
input/contract violations (dimensions, invalid parameters).
"""


class MmnError(Exception):
    """Base class for all mmn errors."""


class DimensionMismatch(MmnError):
    """Array shapes do not conform."""


class NotPositiveDefinite(MmnError):
    """A matrix required to be symmetric positive definite is not."""


class SkewnessOutOfRange(MmnError):
    """Skewness vector violates |delta_i| < 1 or delta' corr^-1 delta < 1."""


class RankDeficient(MmnError):
    """Affine transform matrix does not have full column rank."""


class DomainError(MmnError):
    """Argument outside the domain of an MGF or similar function."""


class UnsupportedOrder(MmnError):
    """Moment order outside the implemented range."""


class UnsupportedLaw(MmnError):
    """Operation not available for the given mixing law."""


class DegenerateSkewness(MmnError):
    """Operation requires delta != 0 (the zero-skewness case is normal)."""


class QuadratureNotConverged(MmnError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class RootNotBracketed(MmnError):
    """Root finder could not bracket a sign change."""


class DegenerateWeights(MmnError):
    """EM responsibilities are degenerate (zero-variance weights)."""


class DegenerateData(MmnError):
    """Data set unusable for fitting (too few rows, singular covariance)."""


class StudyUnstable(MmnError):
    """Too many replicate failures in a Monte Carlo study."""


class FlagMismatch(MmnError):
    """Moment set has the wrong central/non-central flag for the operation."""


class EigenFailure(MmnError):
    """Eigendecomposition failed or produced non-positive eigenvalues."""
