"""Exception types shared across the package.

Plain argument validation raises ValueError; the classes here mark
conditions callers are expected to distinguish programmatically.
"""


class DataError(ValueError):
    """A dataset violates a training precondition (single class, too small)."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values (diverged training, bad weights)."""


class SequencingError(ValueError):
    """Events arrived out of frame order."""


class StreamError(RuntimeError):
    """A frame source failed mid-stream; message names the frame index."""


class ModelFormatError(ValueError):
    """A model file could not be parsed; message includes the byte offset."""


class ModelSchemaError(ValueError):
    """A model file parsed but has an unknown version, kind, or bad dimensions."""


class InfeasibleError(ValueError):
    """No candidate satisfies the latency constraint."""

    def __init__(self, message: str, min_latency_ms: float):
        super().__init__(message)
        self.min_latency_ms = min_latency_ms
