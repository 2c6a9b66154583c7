# errors.py - exception types shared across the toolkit

__all__ = [
    "SubharmonicError",
    "ConfigError",
    "DomainError",
    "MissingParameter",
    "UnsupportedStructure",
    "NoRoot",
    "NoConvergence",
    "DegenerateOrbit",
    "Divergence",
    "NumericalFailure",
]


class SubharmonicError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(SubharmonicError, ValueError):
    """A run configuration could not be parsed or validated."""


class DomainError(SubharmonicError, ValueError):
    """An input lies outside the domain where a formula is defined."""


class MissingParameter(SubharmonicError, ValueError):
    """A control scheme needs a converter parameter that was not given."""


class UnsupportedStructure(SubharmonicError, ValueError):
    """A transfer-function shape the closed-form path does not handle."""


class NoRoot(SubharmonicError):
    """A root search found no sign change inside the allowed interval."""


class NoConvergence(SubharmonicError):
    """A series or an iterative solver failed its convergence check."""


class DegenerateOrbit(SubharmonicError):
    """The periodic orbit has a saturated duty ratio, so the smooth
    cycle-to-cycle map (and its Jacobian) is not defined there."""


class Divergence(SubharmonicError):
    """A simulated state left the configured magnitude bound.

    The partially built trace, when one exists, is attached as ``trace``.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class NumericalFailure(SubharmonicError):
    """A numerical routine failed in a way that must not be ignored."""
