"""
HessCraft exception hierarchy.

Every error raised by the engine derives from HessCraftError and from the
builtin exception it most resembles, so callers can catch either.
"""

from typing import Optional


class HessCraftError(Exception):
    """Base class for all engine errors."""

    def __init__(self, message: str, node_id: Optional[int] = None):
        self.node_id = node_id
        if node_id is not None:
            message = f"{message} (node {node_id})"
        super().__init__(message)


class TapeError(HessCraftError, ValueError):
    """Malformed recording: no inputs, no output, foreign variables, bad tape text."""


class EvaluationError(HessCraftError, ArithmeticError):
    """Domain violation during a forward sweep."""

    def __init__(self, message: str, node_id: Optional[int] = None, op: Optional[str] = None):
        self.op = op
        super().__init__(message, node_id)


class NumericError(HessCraftError, ArithmeticError):
    """Non-finite weight produced inside a backward sweep."""


class StateError(HessCraftError, RuntimeError):
    """Operation requires a forward sweep (or matching adjoints) that is missing."""


class CapacityError(HessCraftError, ValueError):
    """Dense or exhaustive oracle asked to handle a tape above its size cap."""


class DimensionError(HessCraftError, ValueError):
    """Vector length does not match the tape."""


class InvariantViolation(HessCraftError, AssertionError):
    """A structural property checked in debug mode does not hold."""


class UnknownFamilyError(HessCraftError, KeyError):
    """Requested benchmark family is not in the registry."""

    def __str__(self) -> str:
        # KeyError would repr() the message
        return self.args[0] if self.args else ""
