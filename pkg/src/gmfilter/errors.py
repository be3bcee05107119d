"""Exception hierarchy shared by all modules.

Every error carries an ``exit_code`` so the command-line front end can map
failures to process exit statuses without inspecting messages.
"""

from __future__ import annotations


class GMError(Exception):
    """Base class for library errors."""

    exit_code = 4

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self) -> dict:
        return {
            "error": type(self).__name__,
            "message": str(self),
            "details": self.details,
        }


class InputError(GMError, ValueError):
    """Malformed or inconsistent user input."""

    exit_code = 2


class UnsupportedError(GMError):
    """A well-formed request the library deliberately does not handle."""

    exit_code = 3


class NumericalError(GMError, ArithmeticError):
    """A numerical procedure failed (singular matrix, divergence, ...)."""

    exit_code = 4
