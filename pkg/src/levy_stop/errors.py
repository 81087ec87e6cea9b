"""Exception hierarchy shared by the solver modules."""

from __future__ import annotations


class LevyStopError(Exception):
    """Base class for every error raised by :mod:`levy_stop`."""


class ModelError(LevyStopError, ValueError):
    """Invalid model, discounting, reward or cost parameters."""


class DomainError(LevyStopError, ValueError):
    """An argument lies outside the domain of the requested function."""


class UnsupportedError(LevyStopError):
    """The requested model/discounting/reward combination is not supported."""


class DivergenceError(LevyStopError, ArithmeticError):
    """An integral or perpetuity that was requested does not converge."""


class IntegrabilityError(LevyStopError, ArithmeticError):
    """A representation needs a finite moment that the model does not have."""


class InconclusiveError(LevyStopError, ArithmeticError):
    """A numerical limit could not be determined."""


class GridExtensionError(LevyStopError):
    """A grid function was evaluated too far outside its nodes."""

    def __init__(self, message: str, side: str = "left") -> None:
        super().__init__(message)
        self.side = side


class ConsistencyError(LevyStopError, AssertionError):
    """An internal invariant of a solution was violated."""


class ConditionMViolation(LevyStopError):
    """h does not have the single-crossing shape; the solver refuses to proceed."""

    def __init__(self, message: str, report=None) -> None:
        super().__init__(message)
        self.report = report


class ConfigError(LevyStopError, ValueError):
    """A configuration file failed validation."""

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field
