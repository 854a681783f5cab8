"""Exception hierarchy shared across the package."""


class CellCrowdError(Exception):
    """Base class for all package errors."""


class DomainError(CellCrowdError, ValueError):
    """A numeric argument is outside its valid domain."""


class IncompleteBallot(CellCrowdError):
    """A ballot was asked to aggregate before collecting all k votes."""


class UnknownItem(CellCrowdError, KeyError):
    """A vote or consensus result references an item with no ground truth."""


class ParseError(CellCrowdError, ValueError):
    """A record file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MissingFile(CellCrowdError, FileNotFoundError):
    """A required input file does not exist."""


class NonFiniteEnergy(CellCrowdError, ArithmeticError):
    """Level-set evolution produced a non-finite energy (time step too large)."""


class EmptyBatch(CellCrowdError, ValueError):
    """Batch creation was attempted with no items."""


class NotQualified(CellCrowdError):
    """Worker does not meet the qualification gate; tasks stay hidden."""


class DeadlineExceeded(CellCrowdError):
    """Submission arrived after the assignment deadline."""


class InvalidLabel(CellCrowdError, ValueError):
    """An answer used a label outside the configured alphabet."""


class WrongState(CellCrowdError):
    """An operation was applied to a record in an incompatible state."""


class UnknownTask(CellCrowdError, KeyError):
    """Task id does not exist."""


class UnknownWorker(CellCrowdError, KeyError):
    """Worker id is not registered."""


class UnknownAssignment(CellCrowdError, KeyError):
    """Assignment id does not exist."""


class InsufficientWorkers(CellCrowdError, ValueError):
    """A simulated experiment needs at least k distinct workers."""


class TargetUnreachable(CellCrowdError, ValueError):
    """No correlation level reproduces the requested consensus accuracy."""
