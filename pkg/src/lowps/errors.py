"""Exception hierarchy. Each class carries the CLI exit code it maps to."""

from __future__ import annotations


class LowpsError(Exception):
    exit_code = 1


class ParseError(LowpsError):
    exit_code = 2


class PreconditionError(LowpsError, ValueError):
    exit_code = 3


class NotStableError(PreconditionError):
    """Raised when a stability quantity is requested for an unstable matrix."""


class IrregularPencilError(PreconditionError):
    pass


class DerivativeUndefinedError(PreconditionError):
    pass


class ConvergenceError(LowpsError, RuntimeError):
    exit_code = 4


class EigensolveError(ConvergenceError):
    def __init__(self, message: str, z: complex | None = None):
        if z is not None:
            message = f"{message} (z = {z!r})"
        super().__init__(message)
        self.z = z


class CapExceededError(LowpsError):
    exit_code = 5
