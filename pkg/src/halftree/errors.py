"""Exception types raised across the package."""


class HalftreeError(Exception):
    """Base class for all package errors."""


class DomainError(HalftreeError, ValueError):
    pass


class NoRoot(DomainError):
    pass


class BadContrast(DomainError):
    pass


class BadParams(HalftreeError, ValueError):
    pass


class NonPermutation(HalftreeError, ValueError):
    pass


class LengthMismatch(HalftreeError, ValueError):
    pass


class DimensionMismatch(HalftreeError, ValueError):
    pass


class Infeasible(HalftreeError):
    """Constraints cannot be met with the requested rate."""


class SearchExhausted(HalftreeError):
    """A search ran out of budget. ``stats`` and ``profile`` carry diagnostics."""

    def __init__(self, message, stats=None, profile=None):
        super().__init__(message)
        self.stats = stats
        self.profile = profile


class EnsembleDied(SearchExhausted):
    pass


class StepLimitExceeded(SearchExhausted):
    pass


class NodeLimitExceeded(SearchExhausted):
    pass


class FrameError(HalftreeError, ValueError):
    pass


class ParseError(HalftreeError, ValueError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class UnsupportedFormat(ParseError):
    pass
