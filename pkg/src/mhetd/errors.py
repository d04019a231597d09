"""Exception types raised across the toolkit."""


class MhetdError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(MhetdError):
    """Invalid, missing, or unknown configuration key/value."""


class DegreeMismatch(MhetdError):
    """Polynomial degrees violate the model constraints."""


class UnstableModel(MhetdError):
    """A polynomial has a root on or outside the unit disc."""


class DimensionMismatch(MhetdError):
    """Vector/matrix dimensions are inconsistent."""


class PhiSingular(MhetdError):
    """Innovation matrix is singular (trailing noise coefficient is zero)."""


class SingularInformation(MhetdError):
    """Window information (Gram) matrix is numerically singular."""


class NotWarmedUp(MhetdError):
    """Filter stepped before the warm-up window was filled."""


class InsufficientData(MhetdError):
    """Fewer samples supplied than the operation requires."""


class NonFiniteVariance(MhetdError):
    """Noise distribution has no finite variance (nu <= 2)."""


class NoConvergence(MhetdError):
    """Iterative routine failed to reach its tolerance."""


class DegenerateWeights(MhetdError):
    """All particle weights underflowed to zero."""
