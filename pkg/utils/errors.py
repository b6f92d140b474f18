"""
Exception hierarchy for the climb trajectory predictor.

Every error carries the process exit code the command-line front end
returns when it escapes to the top level.
"""

from typing import Any, Optional


class ClimbTPError(Exception):
    """Base class for all predictor errors."""

    exit_code = 1


class DomainError(ClimbTPError, ValueError):
    """An input lies outside the domain of an operation."""

    exit_code = 2


class NoCrossoverError(DomainError):
    """The CAS and Mach targets never meet inside the climb envelope."""


class EnvelopeError(DomainError):
    """A request falls outside the aircraft flight envelope."""

    exit_code = 3


class NumericalError(ClimbTPError, ArithmeticError):
    """
    A non-finite value appeared while integrating the hybrid system.

    Args:
        message: Description of the failure.
        state: The state the failing step started from.
    """

    exit_code = 3

    def __init__(self, message: str, state: Optional[Any] = None):
        super().__init__(message)
        self.state = state


class ConfigError(ClimbTPError, ValueError):
    """
    A configuration value violates its invariants.

    Args:
        key: Name of the offending configuration key.
        message: What is wrong with it.
    """

    exit_code = 2

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class ParseError(ClimbTPError, ValueError):
    """
    A trajectory file is malformed.

    Args:
        message: What is wrong.
        line: 1-based line number in the file, when known.
    """

    exit_code = 2

    def __init__(self, message: str, line: Optional[int] = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")
        self.line = line


class UsageError(ClimbTPError, RuntimeError):
    """The ask/tell protocol of the optimizer was violated."""

    exit_code = 4


class OptimizationError(ClimbTPError, RuntimeError):
    """
    The objective returned a non-finite value.

    Args:
        message: Description of the failure.
        candidate: The candidate vector that produced it.
    """

    exit_code = 4

    def __init__(self, message: str, candidate: Optional[Any] = None):
        super().__init__(message)
        self.candidate = candidate


class PrefixTooShortError(DomainError):
    """The observed prefix cannot hold a learning and a validation set."""

    exit_code = 5


class InsufficientDataError(ClimbTPError):
    """Too few trajectories survived the dataset filters."""

    exit_code = 6
