"""Exception hierarchy shared by every module."""


class BanditNewtonError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(BanditNewtonError, ValueError):
    pass


class PositioningViolation(BanditNewtonError):
    """The body does not satisfy B(1) ⊂ K ⊂ 2B(d+1) where it was assumed."""


class DegenerateBodyError(BanditNewtonError):
    pass


class UnsupportedBodyError(BanditNewtonError):
    """Optimisation was requested over a body without an exact projection."""


class RatioOverflowError(BanditNewtonError, OverflowError):
    def __init__(self, log_ratio):
        self.log_ratio = float(log_ratio)
        super().__init__(f"density ratio overflow: log R = {self.log_ratio:.6g}")


class InfeasibleError(BanditNewtonError):
    pass


class ConfigError(BanditNewtonError, ValueError):
    pass


class AlgorithmFault(BanditNewtonError):
    """Raised when a run aborts; carries the partial trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
