"""Exception types shared across the package."""


class TensorSpliceError(Exception):
    """Base class for all package-specific errors."""


class ShapeMismatch(TensorSpliceError):
    """Two tensors or blocks disagree on their number of modes."""


class DegenerateBlock(TensorSpliceError):
    """A non-empty block was required (density of a size-0 block is undefined)."""


class NotASubblock(TensorSpliceError):
    """Tried to remove entries the target block does not fully contain."""


class PreconditionViolated(TensorSpliceError):
    """Caller broke an ordering requirement, e.g. splice target less dense."""


class OutOfOrderSlice(TensorSpliceError):
    """A slice arrived whose window does not continue the engine frontier."""


class TimeRegression(TensorSpliceError):
    """An event's time bin precedes data that was already processed."""


class IngestError(TensorSpliceError):
    """Line-level ingestion failure; remembers the 1-based line number."""

    def __init__(self, message: str, lineno: int | None = None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class MalformedLine(IngestError):
    """A line does not have the configured columns."""


class BadTimestamp(IngestError):
    """A timestamp field could not be parsed or precedes the stream origin."""


class NegativeValue(IngestError):
    """A value field is negative."""


class DensityInfeasible(TensorSpliceError):
    """An injection spec asks for more distinct cells than its volume holds."""


class ConfigError(TensorSpliceError):
    """Invalid run configuration (CLI exit code 3)."""
