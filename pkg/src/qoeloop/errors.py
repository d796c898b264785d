"""Exception types shared across the package."""


class QoELoopError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(QoELoopError, ValueError):
    """Invalid configuration, value, or structural input."""


class TraceFormatError(ValidationError):
    """A trace file could not be parsed.

    Carries the 1-based record index of the offending entry when known.
    """

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


class InfeasibleError(QoELoopError):
    """No plan satisfies the download-completion and stall constraints."""


class SearchSpaceError(QoELoopError):
    """An exhaustive search would exceed its configured evaluation cap."""
