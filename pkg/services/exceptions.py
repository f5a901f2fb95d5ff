"""
Error hierarchy for the detection services.

Every error derives from SentryError and from the builtin a caller would
naturally catch, so `except ValueError` keeps working at call sites that do
not care about the distinction.
"""


class SentryError(Exception):
    """Base class for all detection-pipeline errors."""


class ConfigError(SentryError, ValueError):
    """A configuration object failed validation."""


class EmptyWindowError(SentryError, ValueError):
    """A time window selects no samples from a track."""


class InsufficientHistoryError(SentryError, ValueError):
    """A track holds too few samples for the requested computation."""


class EmptyInputError(SentryError, ValueError):
    """A collection that must be non-empty was empty."""


class DimensionError(SentryError, ValueError):
    """Vector or network dimensions do not agree."""


class RecordFormatError(SentryError, ValueError):
    """A serialized record could not be parsed."""


class OutOfOrderFrameError(SentryError, ValueError):
    """A frame arrived with a timestamp not after the last processed one."""


class UnknownObjectError(SentryError, KeyError):
    """An object id is not present in the ground truth."""


class DeterminismError(SentryError):
    """A replay produced a different event stream than the recorded run."""
