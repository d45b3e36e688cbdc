"""Reconciliation of correlated Gaussian sequences via coded quantization.

One side quantizes its Gaussian observations and publishes syndrome-style
helper data; the other recovers the quantized sequence from its own
correlated observations through iterative soft demapping and decoding.
"""

from .channel import ChannelParams, generate_pairs, mutual_information_xy
from .errors import (
    ConfigError,
    ConstructionError,
    ConvergenceError,
    DegenerateClassError,
    DegenerateIntervalError,
    EmptyBatchError,
    GaussrecError,
    IndeterminateError,
    InfiniteInformationError,
    InvalidInputError,
    NumericError,
)
from .quantizer import (
    Labeling,
    Quantizer,
    make_labeling,
    make_quantizer,
    optimize_quantizer,
    quantize,
    quantizer_mi,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelParams",
    "ConfigError",
    "ConstructionError",
    "ConvergenceError",
    "DegenerateClassError",
    "DegenerateIntervalError",
    "EmptyBatchError",
    "GaussrecError",
    "IndeterminateError",
    "InfiniteInformationError",
    "InvalidInputError",
    "Labeling",
    "NumericError",
    "Quantizer",
    "generate_pairs",
    "make_labeling",
    "make_quantizer",
    "mutual_information_xy",
    "optimize_quantizer",
    "quantize",
    "quantizer_mi",
    "__version__",
]
