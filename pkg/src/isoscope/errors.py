"""Exception hierarchy shared by all isoscope modules."""


class IsoscopeError(Exception):
    """Base class for library errors."""


class OracleUnavailable(IsoscopeError):
    """The body exposes no route to the requested oracle."""


class DimensionMismatch(IsoscopeError, ValueError):
    pass


class SingularTransform(IsoscopeError, ValueError):
    pass


class VolumeUnavailable(IsoscopeError):
    pass


class DensityUnavailable(IsoscopeError):
    pass


class NoInteriorPoint(IsoscopeError):
    pass


class UnboundedChord(IsoscopeError):
    pass


class RankDeficientCovariance(IsoscopeError, ArithmeticError):
    pass


class DimensionTooLarge(IsoscopeError, ValueError):
    pass


class AllZeroInnerProducts(IsoscopeError, ArithmeticError):
    pass


class QOutOfRange(IsoscopeError, ValueError):
    pass


class NoRoot(IsoscopeError, ArithmeticError):
    pass


class ObjectiveNonFinite(IsoscopeError, ArithmeticError):
    pass


class ConfigError(IsoscopeError, ValueError):
    """Bad user configuration; ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
