"""Error taxonomy shared across the package.

Everything raised on purpose derives from SpellerError so callers (and the
CLI) can separate our failures from genuine bugs.
"""

from __future__ import annotations


class SpellerError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(SpellerError, ValueError):
    """A parameter value is outside its documented domain."""


class InputError(SpellerError, ValueError):
    """An input artifact (recording, log, config, frame) is malformed."""


class ShapeError(SpellerError, ValueError):
    """An array does not have the documented shape."""


class RankError(SpellerError, ValueError):
    """A design matrix is rank deficient.

    column_index is the first offending column (0-based, in the order the
    columns were supplied), counting only the caller's columns, never the
    intercept.
    """

    def __init__(self, message: str, column_index: int | None = None):
        super().__init__(message)
        self.column_index = column_index


class EmptySelectionError(SpellerError):
    """Stepwise selection finished without accepting any feature."""


class DegenerateClassError(SpellerError, ValueError):
    """A training set does not contain enough rows of each class."""


class OverflowError_(SpellerError):
    """More repetitions were accumulated than the schedule allows."""


class PolicyExhaustedError(SpellerError):
    """A scripted intention policy ran out of keys."""


class UndefinedRateError(SpellerError, ValueError):
    """A rate (ITR, accuracy) is undefined for the given inputs."""


class ProviderError(SpellerError):
    """A suggestion provider failed outright (bad config, no response)."""


class ProtocolError(SpellerError):
    """A wire-protocol frame violated the session state machine."""
