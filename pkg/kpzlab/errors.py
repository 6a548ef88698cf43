from typing import Any, Dict


class KpzLabError(Exception):
    """Base class for all errors raised by kpzlab.

    Every error maps to a process exit code and carries a diagnostic payload
    which the command line writes to ``stderr`` as a single JSON line.
    """
    exit_code: int = 1

    def __init__(self, message: str, **payload: Any):
        super().__init__(message)
        self.message = message
        self.__payload = payload

    def payload(self) -> Dict[str, Any]:
        """Return the machine-readable diagnostics for this error."""
        return {
            'error': self.__class__.__name__,
            'message': self.message,
            **self.__payload
        }


class ArgumentError(KpzLabError, ValueError):
    """An argument violates the precondition of an operation."""
    exit_code = 2


class DomainError(ArgumentError):
    """An argument lies outside the supported domain of a function."""


class ConfigurationError(KpzLabError, ValueError):
    """The configuration (or kernel metadata) is incomplete or invalid."""
    exit_code = 2


class NumericError(KpzLabError, ArithmeticError):
    """A computation produced non-finite values or failed to converge."""
    exit_code = 3


class ResourceError(KpzLabError, MemoryError):
    """A problem exceeds the memory or size budget."""
    exit_code = 4


class ContainmentError(ResourceError):
    """A simulated front or mass reached the edge of the finite window, which
    invalidates the run."""
