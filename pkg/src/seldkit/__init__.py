"""Non-neural pipeline for ensemble stereo 3D sound event localization and detection.

Stereo feature extraction, multi-ACCDDOA decoding, specialist-ensemble fusion,
challenge-style scoring, encoder shape tracing and a Monte-Carlo simulator.
"""

from seldkit.core import (
    ClipPredictions,
    SeldEvent,
    TaskConfig,
    ValidationError,
    angular_distance,
    mean_azimuth,
)

__version__ = "0.1.0"

__all__ = [
    "ClipPredictions",
    "SeldEvent",
    "TaskConfig",
    "ValidationError",
    "angular_distance",
    "mean_azimuth",
]
