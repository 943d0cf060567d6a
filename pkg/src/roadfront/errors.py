"""Exception types raised by the toolkit."""


class RoadfrontError(Exception):
    """Base class for all toolkit errors."""


class UnderresolvedKernel(RoadfrontError, ValueError):
    pass


class KernelOverflow(RoadfrontError, OverflowError):
    """|a L| exceeds the configured exponent bound."""


class NoPositiveRoot(RoadfrontError, ValueError):
    pass


class NonPositiveGrowth(RoadfrontError, ValueError):
    pass


class CriticalR0(RoadfrontError, ValueError):
    pass


class SupportTouchesBoundary(RoadfrontError, ValueError):
    pass


class CflViolation(RoadfrontError, RuntimeError):
    pass


class NonFinite(RoadfrontError, FloatingPointError):
    pass


class NotConverged(RoadfrontError, RuntimeError):
    """Steady-state iteration hit t_max; ``state`` holds the last iterate."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class NoCrossing(RoadfrontError, ValueError):
    pass


class InsufficientData(RoadfrontError, ValueError):
    pass


class NonPositiveTail(RoadfrontError, ValueError):
    pass


class ConfigError(RoadfrontError, ValueError):
    """Invalid configuration; message names the offending field."""
