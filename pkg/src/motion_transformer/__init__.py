"""
Inertial odometry with unsupervised domain adaptation across sensor placements.
"""

from .config import LossWeights, TrainConfig
from .dataio import ImuSequence, LabelledWindow, NormStats, PoseTrack, Window
from .log import configure_logging, setup_default_logging
from .models import ModelArch, ModelBundle
from .types import (
    DataError,
    DomainTag,
    EvalMode,
    MotionTransformerError,
    NumericError,
    PolarVector,
    Pose2D,
    PoseSample,
    UsageError,
)

__all__ = [
    "DataError",
    "DomainTag",
    "EvalMode",
    "ImuSequence",
    "LabelledWindow",
    "LossWeights",
    "ModelArch",
    "ModelBundle",
    "MotionTransformerError",
    "NormStats",
    "NumericError",
    "PolarVector",
    "Pose2D",
    "PoseSample",
    "PoseTrack",
    "TrainConfig",
    "UsageError",
    "Window",
    "configure_logging",
    "setup_default_logging",
]
