"""Typed exceptions shared across the package."""


class InvLabError(Exception):
    """Base class for every error raised by bp_invlab."""


class NonFiniteError(InvLabError):
    """Input contains NaN or infinite entries."""


class RankDeficientError(InvLabError):
    """Operator is not full row rank; the back-projection term is undefined."""


class DimensionMismatchError(InvLabError):
    """Vector or matrix dimensions do not match the operation."""


class BadLengthError(InvLabError):
    """Signal length is incompatible with the transform geometry."""


class BadGeometryError(InvLabError):
    """Image side, scale, or kernel geometry is invalid."""


class ZeroColumnError(InvLabError):
    """Operator has a zero column where a nonzero one is required."""


class NonpositiveRadiusError(InvLabError):
    """l1-ball radius must be strictly positive."""


class NegativeThresholdError(InvLabError):
    """Soft threshold must be nonnegative."""


class SingularSystemError(InvLabError):
    """D'D is not positive definite."""


class WrongVariantError(InvLabError):
    """Operation applies to a different prior variant."""


class NonFiniteIterateError(InvLabError):
    """A solver iterate diverged or became non-finite."""


class BadSupportSizeError(InvLabError):
    """Support size k is outside [1, m]."""


class BadDeltaError(InvLabError):
    """Null-space contraction delta must lie in (0, 1]."""


class InsufficientDataError(InvLabError):
    """Not enough recorded points to fit a rate."""


class BadKError(InvLabError):
    """Sparsification level k is outside [1, n]."""


class ZeroSignalError(InvLabError):
    """Cannot calibrate noise against an all-zero signal."""


class UnsupportedFormatError(InvLabError):
    """Image file is not binary 8-bit PGM (P5, maxval 255)."""


class NonSquareError(InvLabError):
    """Image is not square."""


class NonPowerOfTwoError(InvLabError):
    """Image side is not a power of two."""


class ConfigError(InvLabError):
    """Experiment configuration is invalid."""
