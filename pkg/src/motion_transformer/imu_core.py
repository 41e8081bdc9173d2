"""
Strapdown inertial physical model.

Gyroscope rates are integrated into attitude, accelerometer specific force is
rotated into the navigation frame, gravity is removed and the remaining linear
acceleration is integrated twice. The sensor measures specific force, so a
device at rest reads +g (rotated into the sensor frame).

Conventions:
    - quaternions are (qw, qx, qy, qz), Hamilton product, sensor -> navigation
    - gyro sample k is the mean rate over [t_k, t_k + dt]
    - accelerometer sample k is rotated with the attitude at t_k
"""

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np

from motion_transformer.types import GRAVITY, DataError, PolarVector, UsageError, wrap_angle

if TYPE_CHECKING:
    from motion_transformer.dataio import ImuSequence, Window

DEFAULT_GRAVITY = np.array([0.0, 0.0, GRAVITY], dtype=np.float64)

_UNIT_TOL = 1e-9


@dataclass(frozen=True)
class ImuSample:
    t: float
    w: tuple[float, float, float]
    a: tuple[float, float, float]

    def __post_init__(self):
        values = (self.t, *self.w, *self.a)
        if not all(math.isfinite(v) for v in values):
            raise DataError(f"Non-finite IMU sample at t={self.t}")
        if self.t < 0:
            raise DataError(f"Negative IMU timestamp {self.t}")


@dataclass(frozen=True)
class UnitQuaternion:
    qw: float
    qx: float
    qy: float
    qz: float

    def __post_init__(self):
        norm = math.sqrt(self.qw**2 + self.qx**2 + self.qy**2 + self.qz**2)
        if abs(norm - 1.0) > _UNIT_TOL:
            raise UsageError(f"Quaternion is not unit-norm (|q| = {norm!r})")

    @staticmethod
    def identity() -> "UnitQuaternion":
        return UnitQuaternion(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def from_array(q: np.ndarray) -> "UnitQuaternion":
        q = np.asarray(q, dtype=np.float64)
        q = q / np.linalg.norm(q)
        return UnitQuaternion(float(q[0]), float(q[1]), float(q[2]), float(q[3]))

    @staticmethod
    def from_yaw(psi: float) -> "UnitQuaternion":
        return UnitQuaternion(math.cos(psi / 2.0), 0.0, 0.0, math.sin(psi / 2.0))

    def as_array(self) -> np.ndarray:
        return np.array([self.qw, self.qx, self.qy, self.qz], dtype=np.float64)

    def yaw(self) -> float:
        return float(yaw_of(self.as_array()))

    def __mul__(self, other: "UnitQuaternion") -> "UnitQuaternion":
        return UnitQuaternion.from_array(quat_multiply(self.as_array(), other.as_array()))


@dataclass(frozen=True)
class NavState:
    q: UnitQuaternion
    v: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=np.float64).reshape(3)
        p = np.asarray(self.p, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(p))):
            raise DataError("Non-finite navigation state")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "p", p)


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product, broadcasting over leading axes."""
    aw, ax, ay, az = np.moveaxis(np.asarray(a, dtype=np.float64), -1, 0)
    bw, bx, by, bz = np.moveaxis(np.asarray(b, dtype=np.float64), -1, 0)
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrices (..., 3, 3) mapping sensor vectors into the navigation frame."""
    w, x, y, z = np.moveaxis(np.asarray(q, dtype=np.float64), -1, 0)
    return np.stack(
        [
            np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], axis=-1),
            np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], axis=-1),
            np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], axis=-1),
        ],
        axis=-2,
    )


def yaw_of(q: np.ndarray) -> np.ndarray:
    """Heading of the body x axis projected onto the navigation x-y plane."""
    w, x, y, z = np.moveaxis(np.asarray(q, dtype=np.float64), -1, 0)
    return np.arctan2(2 * (x * y + w * z), 1 - 2 * (y * y + z * z))


def _as_quat_array(q0: "UnitQuaternion | np.ndarray") -> np.ndarray:
    if isinstance(q0, UnitQuaternion):
        return q0.as_array()
    arr = np.asarray(q0, dtype=np.float64).reshape(4)
    if abs(np.linalg.norm(arr) - 1.0) > _UNIT_TOL:
        raise UsageError("q0 must be unit-norm")
    return arr


def _as_vectors(seq: Any, name: str) -> np.ndarray:
    arr = np.asarray(seq, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise UsageError(f"{name} must be an (N, 3) sequence, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        row = int(np.argwhere(~np.isfinite(arr))[0][0])
        raise DataError(f"{name} has a non-finite value at sample {row}")
    return arr


def integrate_orientation(w_seq: Any, dt: float, q0: "UnitQuaternion | np.ndarray") -> np.ndarray:
    """Integrate body rates into attitude, one quaternion per input sample.

    Each step composes the exponential map of w*dt on the right and
    renormalises, so q[k] is the attitude at t_k + dt.
    """
    if not dt > 0:
        raise UsageError(f"dt must be positive, got {dt}")
    w = _as_vectors(w_seq, "w_seq")
    q = _as_quat_array(q0)
    theta = w * dt
    angle = np.linalg.norm(theta, axis=1)
    half = 0.5 * angle
    # sin(x/2)/x -> 1/2 as x -> 0
    scale = np.where(angle > 1e-12, np.sin(half) / np.where(angle > 1e-12, angle, 1.0), 0.5 - angle**2 / 48.0)
    dq = np.concatenate([np.cos(half)[:, None], theta * scale[:, None]], axis=1)
    out = np.empty((len(w), 4), dtype=np.float64)
    for k in range(len(w)):
        q = quat_multiply(q, dq[k])
        q = q / np.linalg.norm(q)
        out[k] = q
    return out


def transform_to_nav(a_seq: Any, q_seq: Any) -> np.ndarray:
    a = _as_vectors(a_seq, "a_seq")
    q = np.asarray(q_seq, dtype=np.float64)
    if q.ndim != 2 or q.shape[1] != 4:
        raise UsageError(f"q_seq must be an (N, 4) sequence, got shape {q.shape}")
    if len(a) != len(q):
        raise UsageError(f"transform_to_nav length mismatch: {len(a)} accelerations vs {len(q)} quaternions")
    return np.einsum("nij,nj->ni", quat_to_matrix(q), a)


def remove_gravity(a_nav_seq: Any, g: Any = DEFAULT_GRAVITY) -> np.ndarray:
    g_vec = np.asarray(g, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(g_vec)):
        raise UsageError("Gravity vector must be finite")
    return _as_vectors(a_nav_seq, "a_nav_seq") - g_vec


def double_integrate(lin_acc_seq: Any, dt: float, v0: Any, p0: Any) -> tuple[np.ndarray, np.ndarray]:
    """Trapezoidal velocity and position; index k is the state at sample time k."""
    if not dt > 0:
        raise UsageError(f"dt must be positive, got {dt}")
    a = _as_vectors(lin_acc_seq, "lin_acc_seq")
    v0 = np.asarray(v0, dtype=np.float64).reshape(3)
    p0 = np.asarray(p0, dtype=np.float64).reshape(3)
    if len(a) == 0:
        return np.zeros((0, 3)), np.zeros((0, 3))
    dv = np.zeros_like(a)
    dv[1:] = 0.5 * (a[:-1] + a[1:]) * dt
    v = v0 + np.cumsum(dv, axis=0)
    dp = np.zeros_like(v)
    dp[1:] = 0.5 * (v[:-1] + v[1:]) * dt
    p = p0 + np.cumsum(dp, axis=0)
    return v, p


def _imu_arrays(window: "ImuSequence | Window") -> tuple[np.ndarray, np.ndarray, float]:
    frames = getattr(window, "frames", None)
    if frames is not None:
        w, a = frames[:, 3:6], frames[:, 0:3]
    else:
        w, a = window.w, window.a
    rate = float(window.rate_hz)
    if len(w) == 0:
        raise UsageError("strapdown over an empty window")
    return np.asarray(w), np.asarray(a), 1.0 / rate


def propagate(window: "ImuSequence | Window", initial: NavState, g: Any = DEFAULT_GRAVITY) -> NavState:
    """Run the full strapdown pipeline over a window; returns the state at window end.

    The window covers n sample periods, the last period is closed with the
    final linear acceleration held.
    """
    w, a, dt = _imu_arrays(window)
    q0 = initial.q.as_array()
    q = integrate_orientation(w, dt, q0)
    q_at_samples = np.vstack([q0[None, :], q[:-1]])
    lin = remove_gravity(transform_to_nav(a, q_at_samples), g)
    v, p = double_integrate(lin, dt, initial.v, initial.p)
    v_end = v[-1] + lin[-1] * dt
    p_end = p[-1] + 0.5 * (v[-1] + v_end) * dt
    return NavState(q=UnitQuaternion.from_array(q[-1]), v=v_end, p=p_end)


def strapdown_displacement(
    window: "ImuSequence | Window",
    q0: UnitQuaternion,
    v0: Any,
    g: Any = DEFAULT_GRAVITY,
) -> PolarVector:
    start = NavState(q=q0, v=np.asarray(v0, dtype=np.float64), p=np.zeros(3))
    end = propagate(window, start, g)
    dl = math.hypot(float(end.p[0]), float(end.p[1]))
    dpsi = wrap_angle(end.q.yaw() - q0.yaw())
    return PolarVector(dl=dl, dpsi=dpsi)
