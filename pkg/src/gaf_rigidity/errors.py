"""Exception and warning types shared across the package."""


class GafError(Exception):
    """Base class for all package errors."""


class NumericalError(GafError):
    """A numerical routine failed; ``op`` names the failing operation."""

    def __init__(self, message, op=None):
        super().__init__(message)
        self.op = op


class NonConvergent(NumericalError):
    pass


class KernelBoundViolated(NumericalError):
    pass


class RootFindingStalled(NumericalError):
    pass


class ContourThroughZero(NumericalError):
    pass


class CertificationError(NumericalError):
    """Root list and argument-principle count disagree."""


class QuadratureError(NumericalError):
    pass


class SupportExceedsValidity(GafError, ValueError):
    pass


class GridTooSmall(GafError, ValueError):
    pass


class ConfigError(GafError, ValueError):
    pass


class PrecisionLossWarning(RuntimeWarning):
    pass


class TruncationWarning(RuntimeWarning):
    pass


class IllConditionedWarning(RuntimeWarning):
    pass
