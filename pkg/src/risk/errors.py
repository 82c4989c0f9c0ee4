"""Exception hierarchy for the risk package."""


class RiskError(Exception):
    """Base class for all package errors."""


class ParseError(RiskError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateId(RiskError):
    pass


class EmptyDataset(RiskError):
    pass


class OutOfCell(RiskError):
    pass


class OutOfBounds(RiskError):
    pass


class WeakParameter(RiskError):
    pass


class ValueTooLong(RiskError):
    pass


class AuthenticationFailure(RiskError):
    pass


class PaddingError(RiskError):
    pass


class CorruptIndex(RiskError):
    pass


class VersionMismatch(CorruptIndex):
    pass


class ProtocolError(RiskError):
    pass


class EmptyKeywords(RiskError):
    pass


class EmptyPhase1(RiskError):
    """Phase one matched no entry; the caller falls back to the r = theta*w schedule."""


class NoMatchingObject(RiskError):
    pass


class NotFound(RiskError):
    pass


class CapacityExceeded(RiskError):
    pass
