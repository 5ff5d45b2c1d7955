"""Error types raised across the package."""


class BogwatchError(Exception):
    """Base class for all package errors."""


class ShapeError(BogwatchError, ValueError):
    """Array dimensions do not match what an operation requires."""


class OutOfFieldError(BogwatchError, ValueError):
    """Pixel lies outside the image or beyond the lens field of view."""


class InvalidDirectionError(BogwatchError, ValueError):
    """3-D direction is not unit-norm."""


class NoSunError(BogwatchError, ValueError):
    """Sun is below the horizon where an operation needs a sun pixel."""


class ModelError(BogwatchError, ValueError):
    """A model cannot be built or evaluated from the given data."""


class DataError(BogwatchError, ValueError):
    """Training or input data is empty or otherwise unusable."""


class DivergenceError(BogwatchError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")


class WeatherParseError(BogwatchError, ValueError):
    """Weather CSV row could not be parsed or violates record invariants."""


class OrderingError(BogwatchError, ValueError):
    """Timestamps are not strictly orderable (duplicates present)."""


class RangeError(BogwatchError, ValueError):
    """A position falls outside the configured extent."""
