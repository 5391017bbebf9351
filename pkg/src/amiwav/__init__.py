"""Wavelet load models from hourly smart-meter (AMI) data."""

from .errors import (
    AmiwavError,
    CorruptFileError,
    DataError,
    DegenerateProfileError,
    InvalidArgumentError,
    NotFoundError,
    StructureError,
    UndefinedMetricError,
    UnsupportedVersionError,
)
from .load_model import LoadProfile, WaveletLoadModel, build_model, compute_metrics, detect_events, synthesize
from .wavelet1d import decompose, reconstruct, synthesize_approximation, synthesize_detail
from .wavelet2d import decompose2d, reconstruct2d, vertical_coefficients

__version__ = "0.1.0"
