"""Exception hierarchy shared by every module."""

from __future__ import annotations


class AvqeError(Exception):
    """Base class for all errors raised by the package."""


class DenseCapExceeded(AvqeError):
    pass


class LambdaOutOfRange(AvqeError, ValueError):
    pass


class NumericalFailure(AvqeError):
    pass


class DegeneratePath(AvqeError):
    pass


class DimensionMismatch(AvqeError, ValueError):
    pass


class LengthMismatch(AvqeError, ValueError):
    pass


class CapExceeded(AvqeError):
    pass


class NonpositiveInput(AvqeError, ValueError):
    pass


class EpsilonTooLarge(AvqeError, ValueError):
    pass


class NonfiniteEnergy(AvqeError):
    pass


class SingularMetric(AvqeError):
    pass


class TrackingLost(AvqeError):
    """Guarantee-mode radius assertion failed; carries the records so far."""

    def __init__(self, message: str, records=None):
        super().__init__(message)
        self.records = records or []


class MaxSlicesExceeded(AvqeError):
    pass


class NonpositiveGapBound(AvqeError, ValueError):
    pass


class CertificateRequired(AvqeError):
    pass


class RetryExceeded(AvqeError):
    """A slice failed certification too many times in a row."""

    def __init__(self, message: str, summary=None):
        super().__init__(message)
        self.summary = summary


class StallDetected(AvqeError):
    def __init__(self, message: str, summary=None):
        super().__init__(message)
        self.summary = summary


class H2TermBlowup(AvqeError):
    pass


class InvalidParams(AvqeError, ValueError):
    pass


class ConfigInvalid(AvqeError, ValueError):
    pass


class MinimizerNotConverged(AvqeError):
    pass
