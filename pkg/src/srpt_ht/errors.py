"""Exception types raised across the package."""


class SrptError(Exception):
    """Base class for all package errors."""


class QuadratureNotConverged(SrptError):
    pass


class UnboundedSupportRequired(SrptError, ValueError):
    pass


class DivisionByZeroTail(SrptError, ZeroDivisionError):
    pass


class OutOfHorizon(SrptError, ValueError):
    pass


class NegativeInitialValue(SrptError, ValueError):
    pass


class EventLogMissing(SrptError):
    pass


class GridMismatch(SrptError, KeyError):
    pass


class InvalidLevels(SrptError, ValueError):
    pass


class EmptySample(SrptError, ValueError):
    pass


class ConfigInvalid(SrptError, ValueError):
    pass


class HardCheckFailed(SrptError):
    """A pathwise invariant (sandwich, coupling) was violated."""


class ReplicationFailed(SrptError):
    """A replication raised; the message carries its seed triple."""
