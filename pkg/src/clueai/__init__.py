"""Three-stream anomaly identification: numpy autodiff core, MFCC audio
pipeline, CNN-LSTM-attention streams, late fusion, experiment grid."""

__version__ = "0.1.0"

from .errors import (ClueError, ConfigError, DataError, DimensionError,
                     FormatError, InputError, ManifestError, NumericError,
                     ParameterError)
from .tensor import Parameter, Tensor

__all__ = [
    "ClueError", "ConfigError", "DataError", "DimensionError", "FormatError",
    "InputError", "ManifestError", "NumericError", "ParameterError",
    "Parameter", "Tensor", "__version__",
]
