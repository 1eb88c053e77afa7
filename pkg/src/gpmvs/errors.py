"""Exception types raised across the package."""


class GPMVSError(Exception):
    """Base class for all errors raised by gpmvs."""


class NotARotation(GPMVSError, ValueError):
    """A matrix failed the orthonormality or determinant check."""


class InvalidRange(GPMVSError, ValueError):
    pass


class DimensionMismatch(GPMVSError, ValueError):
    pass


class UnsupportedKernel(GPMVSError, ValueError):
    pass


class FactorizationFailure(GPMVSError, ArithmeticError):
    """Cholesky factorization failed even after jitter escalation."""


class NonPositiveInnovation(GPMVSError, ArithmeticError):
    """The scalar innovation variance of a measurement update was <= 0."""


class BatchTooLarge(GPMVSError, ValueError):
    pass


class NoValidPixels(GPMVSError, ValueError):
    pass


class TensorFormatError(GPMVSError, ValueError):
    pass
