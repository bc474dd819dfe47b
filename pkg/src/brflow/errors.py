"""Exception hierarchy shared by every brflow module."""

from __future__ import annotations


class BrflowError(Exception):
    """Base class for all errors raised by brflow."""


class InvalidMetric(BrflowError, ValueError):
    """A metric coefficient is non-positive or non-finite."""


class NonUnimodular(BrflowError, ValueError):
    """The structure constants have a non-vanishing trace form."""


class WrongParams(BrflowError, ValueError):
    """Class parameters or initial data violate the class constraints."""


class NoClosedForm(BrflowError):
    """The requested class or sub-case has no closed-form solution."""


class TimeOutOfRange(BrflowError, ValueError):
    """A time outside the existence interval of the solution was requested."""


class RootNotBracketed(BrflowError, RuntimeError):
    """Bisection was started on an interval without a sign change."""


class MaxStepsExceeded(BrflowError, RuntimeError):
    """The integrator ran out of its step budget."""


class NonFiniteState(BrflowError, FloatingPointError):
    """The right-hand side produced a NaN or infinity."""


class NonDiagonalFlow(BrflowError, RuntimeError):
    """The Ricci tensor left the diagonal in the chosen frame."""


class InsufficientData(BrflowError, ValueError):
    """Too few trajectory samples inside a fitting window."""


class ConfigError(BrflowError, ValueError):
    """A run configuration could not be parsed or validated."""
