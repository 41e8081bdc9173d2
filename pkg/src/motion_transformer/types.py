import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

GRAVITY = 9.80665


class MotionTransformerError(Exception):
    """Base class for all errors raised by motion_transformer."""


class UsageError(MotionTransformerError, ValueError):
    """Bad arguments, incompatible shapes, unknown domains or config keys."""


class DataError(MotionTransformerError, ValueError):
    """Input files or sequences violate their schema."""


class NumericError(MotionTransformerError, ArithmeticError):
    """A loss or state went non-finite."""


class EvalMode(Enum):
    SOURCE_ONLY = "source-only"
    TARGET_ONLY = "target-only"
    ADAPTED = "adapted"


def wrap_angle(angle: float) -> float:
    """Reduce an angle to (-pi, pi]."""
    out = math.remainder(angle, 2.0 * math.pi)
    if out <= -math.pi:
        out += 2.0 * math.pi
    return out


def wrap_angles(angles: np.ndarray) -> np.ndarray:
    """Vectorised wrap_angle."""
    out = np.remainder(np.asarray(angles, dtype=np.float64) + np.pi, 2.0 * np.pi) - np.pi
    # remainder maps +pi onto -pi; (-pi, pi] wants the other end
    return np.where(out <= -np.pi, out + 2.0 * np.pi, out)


@dataclass(frozen=True)
class DomainTag:
    name: str

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name.strip():
            raise UsageError("Domain name must be a non-empty string")

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class PolarVector:
    """Planar displacement magnitude and heading change over one window."""

    dl: float
    dpsi: float

    def __post_init__(self):
        if not (math.isfinite(self.dl) and math.isfinite(self.dpsi)):
            raise DataError(f"Non-finite polar vector: ({self.dl}, {self.dpsi})")
        if self.dl < 0:
            raise UsageError(f"Polar vector dl must be >= 0, got {self.dl}")
        object.__setattr__(self, "dpsi", wrap_angle(self.dpsi))

    def as_array(self) -> np.ndarray:
        return np.array([self.dl, self.dpsi], dtype=np.float64)


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    psi: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.psi)):
            raise DataError(f"Non-finite pose: ({self.x}, {self.y}, {self.psi})")
        object.__setattr__(self, "psi", wrap_angle(self.psi))


@dataclass(frozen=True)
class PoseSample:
    """Timestamped navigation-frame ground-truth pose."""

    t: float
    x: float
    y: float
    psi: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.t, self.x, self.y, self.psi)):
            raise DataError(f"Non-finite pose sample at t={self.t}")
        object.__setattr__(self, "psi", wrap_angle(self.psi))

    def pose(self) -> Pose2D:
        return Pose2D(self.x, self.y, self.psi)
