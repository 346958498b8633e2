"""Exception types raised by rankpower."""


class RankPowerError(Exception):
    """Base class for all computational errors in this package."""


class DuplicateValue(RankPowerError, ValueError):
    """Two observations compare equal; ranks are undefined without ties handling."""


class LengthMismatch(RankPowerError, ValueError):
    """A score vector does not match the pooled sample size."""


class CapExceeded(RankPowerError):
    """The number of rank sets to enumerate exceeds the configured cap."""


class QuadratureFailure(RankPowerError):
    """Numerical integration did not reach the requested tolerance."""


class NotBracketed(RankPowerError):
    """A monotone search could not bracket its target."""


class NoSolution(RankPowerError):
    """An equation has no root on the admissible interval."""


class DegenerateFit(RankPowerError):
    """Too few usable points to fit an expansion."""


class ZeroDerivative(RankPowerError):
    """A derivative needed as a divisor vanishes."""


class NonFinite(RankPowerError, ValueError):
    """A function evaluation returned a non-finite value."""
