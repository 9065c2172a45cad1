"""Exception types shared across the package."""


class MtrackError(Exception):
    """Base class for all package errors."""


class MalformedFile(MtrackError):
    pass


class InconsistentFrame(MtrackError):
    pass


class NonFinite(MtrackError):
    pass


class IoFailure(MtrackError):
    pass


class MissingFootSegment(MtrackError):
    pass


class LengthMismatch(MtrackError):
    pass


class DimensionMismatch(MtrackError):
    pass


class LimitViolation(MtrackError):
    pass


class UnresolvedName(MtrackError):
    pass


class DomainError(MtrackError, ValueError):
    pass


class ShapeMismatch(MtrackError, ValueError):
    pass


class HistoryUnderflow(MtrackError):
    pass


class BranchViolation(MtrackError):
    """Some sigma * a_i falls outside (0, 1), so the stationary error is not positive."""


class EmptyBranch(MtrackError):
    """No sigma in the search interval keeps every sigma * a_i inside (0, 1)."""


class TooShort(MtrackError, ValueError):
    pass
