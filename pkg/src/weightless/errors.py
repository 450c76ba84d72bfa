"""Exception types shared across the package."""


class WeightlessError(Exception):
    """Base class for package errors."""


class DimensionError(WeightlessError, ValueError):
    """Array or sequence length does not match what the model expects."""


class FormatError(WeightlessError, ValueError):
    """A file is malformed, truncated or carries an unknown format version."""


class SimulationDiverged(WeightlessError, FloatingPointError):
    """The simulator produced a non-finite state."""
