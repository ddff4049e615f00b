"""Exception and warning classes shared across the package."""


class LocalLimitError(Exception):
    """Base class for every error raised by this package."""


class InvalidParams(LocalLimitError, ValueError):
    """Nonpositive scale, bad grid size, N below sigma, and similar contract breaks."""


class NonnormalizedGrid(LocalLimitError, ValueError):
    pass


class DivergentMoment(LocalLimitError):
    pass


class DomainTooSmall(LocalLimitError):
    pass


class QuadratureUnreliable(LocalLimitError):
    pass


class NearZeroT(LocalLimitError):
    pass


class MeanNotZero(LocalLimitError):
    pass


class LimitMismatch(LocalLimitError):
    pass


class NoValidT(LocalLimitError):
    pass


class NonpositiveC(LocalLimitError):
    pass


class NoCrossing(LocalLimitError):
    pass


class NotDominatable(LocalLimitError):
    pass


class DominationViolated(LocalLimitError):
    def __init__(self, message, witnesses=()):
        super().__init__(message)
        self.witnesses = list(witnesses)


class AliasingDetected(LocalLimitError):
    pass


class NyquistExceeded(LocalLimitError):
    pass


class SupportOverflow(LocalLimitError):
    pass


class SpacingMismatch(LocalLimitError, ValueError):
    pass


class GridMismatch(LocalLimitError, ValueError):
    pass


class TailNotNegligible(LocalLimitError):
    pass


class CostGuard(LocalLimitError):
    pass


class ReportIOError(LocalLimitError, OSError):
    pass


class ZeroModulusWarning(RuntimeWarning):
    """|chf(t)| fell below the underflow floor; the normalized modulus is reported as 0."""


class TruncatedScan(RuntimeWarning):
    """A grid characteristic function cannot be trusted past its Nyquist frequency."""
