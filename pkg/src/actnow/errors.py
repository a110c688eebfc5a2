# Exception hierarchy for the actnow engine
from __future__ import annotations


class ActNowError(Exception):
    """Base class for every error raised by actnow."""


class ConfigError(ActNowError, ValueError):
    pass


class GraphFormatError(ActNowError, ValueError):
    pass


class ShapeMismatchError(GraphFormatError):
    pass


class NonFiniteEntryError(GraphFormatError):
    def __init__(self, row: int, col: int, source: str = ""):
        self.row = row
        self.col = col
        where = f" in {source}" if source else ""
        super().__init__(f"Non-finite entry at row {row}, col {col}{where}")


class RangeTooShortError(ActNowError, ValueError):
    pass


class SampleRangeError(ActNowError, IndexError):
    pass


class NonSequentialPushError(ActNowError, ValueError):
    pass


class DuplicatePushError(NonSequentialPushError):
    pass


class LeakageError(ActNowError, RuntimeError):
    """A buffer read touched a time index beyond the stream's current time."""

    def __init__(self, requested: int, now: int):
        self.requested = requested
        self.now = now
        super().__init__(f"Read of t={requested} attempted while now={now}")


class EvictedError(ActNowError, IndexError):
    pass


class DivergenceError(ActNowError, FloatingPointError):
    pass


class TrainingDivergedError(ActNowError, RuntimeError):
    def __init__(self, message: str, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint


class CheckpointError(ActNowError, ValueError):
    pass


class EmptyLogsError(ActNowError, ValueError):
    pass
