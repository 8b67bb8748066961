"""Exception types shared across the package."""

from __future__ import annotations


class ChoreoError(Exception):
    """Base class for every error this package raises on purpose."""


class InputError(ChoreoError, ValueError):
    """Bad argument or malformed input data."""


class IngestError(InputError):
    """A source file could not be parsed. The message names the file."""


class CueSheetError(InputError):
    """Cue sheet rejected. The message carries the offending row number."""


class ModeTransitionError(ChoreoError):
    """Illegal control-mode transition. Names both the mode and the event."""


class PlanningError(ChoreoError):
    """Every candidate transition plan failed validation.

    Carries the validation report of each attempt so callers can show why
    both the direct and the rerouted path were rejected.
    """

    def __init__(self, message: str, reports: list) -> None:
        super().__init__(message)
        self.reports = list(reports)


class ProtocolError(ChoreoError):
    """Malformed or out-of-contract wire message."""
