"""Custom exceptions for the quantum bit commitment simulator."""


class QBCSimError(Exception):
    """Base exception for simulator errors."""

    pass


class ConfigurationError(QBCSimError):
    """Raised when configuration is invalid or missing."""

    pass


class StateValidationError(QBCSimError, ValueError):
    """Raised when a qubit state is not normalized."""

    def __init__(self, message: str, norm: float | None = None):
        super().__init__(message)
        self.norm = norm


class PreconditionError(QBCSimError, ValueError):
    """Raised when an operation is called outside its precondition."""

    pass


class ContractViolationError(PreconditionError):
    """Raised when a cheating strategy is driven outside its contract."""

    pass


class TranscriptError(QBCSimError):
    """Raised when a transcript is malformed or out of order."""

    def __init__(self, message: str, seq: int | None = None):
        super().__init__(message)
        self.seq = seq


class InvariantViolationError(QBCSimError):
    """Raised when an internal invariant does not hold at runtime."""

    pass
