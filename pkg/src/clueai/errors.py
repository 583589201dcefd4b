"""Exception hierarchy. Every error raised by this package derives from ClueError."""


class ClueError(Exception):
    """Base class for all package errors."""


class DimensionError(ClueError):
    """Tensor/layer shape mismatch."""


class NumericError(ClueError):
    """NaN or Inf encountered where finite values are required."""


class ParameterError(ClueError):
    """An operation was called with an invalid parameter value."""


class ConfigError(ClueError):
    """Invalid model, dataset or run configuration."""


class InputError(ClueError):
    """Runtime input missing or malformed (empty sequence, absent modality, ...)."""


class DataError(ClueError):
    """Dataset-level problem (empty class, class too small to split, ...)."""


class FormatError(ClueError):
    """A file on disk could not be parsed; message carries path and byte offset."""


class ManifestError(ClueError):
    """Weight manifest does not match the model it is loaded into."""
