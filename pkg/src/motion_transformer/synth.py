"""
Synthetic pedestrian walks and sensor placements with exact ground truth.

A walk is a planar path whose turn rate and speed are mean-reverting random
processes, interpolated with cubic splines and integrated on a fine grid.
Navigation-frame accelerations are the central second differences of the
sampled positions, so the physical model inverts the rendered IMU stream
exactly when the placement adds no bias or noise.

Device attitude is heading yaw, then the fixed mounting rotation, then a
sway about the sensor x axis.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterator, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline
from scipy.signal import lfilter
from scipy.spatial.transform import Rotation

from motion_transformer.config import DatasetManifest, Section, coerce_value
from motion_transformer.dataio import (
    ImuSequence,
    LabelledWindow,
    PoseTrack,
    Window,
    make_labelled_windows,
    make_windows,
    write_imu_csv,
    write_pose_csv,
)
from motion_transformer.imu_core import DEFAULT_GRAVITY, UnitQuaternion
from motion_transformer.types import DomainTag, UsageError, wrap_angles
from motion_transformer.util import stable_key, worker_count

logger = logging.getLogger(__name__)

_OVERSAMPLE = 10
_PAD = 2

DEFAULT_PRESETS = ("synthetic-handheld", "synthetic-pocket", "synthetic-trolley")


@dataclass(frozen=True)
class WalkParams:
    duration: float = 2400.0
    speed_mean: float = 1.4
    speed_jitter: float = 0.1
    turn_rate_std: float = 0.1
    step_freq: float = 2.0
    step_amp: float = 1.0
    seed: int = 0
    rate_hz: float = 100.0
    turn_tau: float = 1.0
    speed_tau: float = 2.0

    def __post_init__(self):
        if not self.duration > 0:
            raise UsageError(f"duration must be > 0, got {self.duration}")
        if not self.speed_mean > 0:
            raise UsageError(f"speed_mean must be > 0, got {self.speed_mean}")
        if not 0 <= self.speed_jitter < self.speed_mean:
            raise UsageError("speed_jitter must be in [0, speed_mean)")
        if not 1.0 <= self.step_freq <= 3.0:
            raise UsageError(f"step_freq must be in [1, 3] Hz, got {self.step_freq}")
        if self.turn_rate_std < 0 or self.step_amp < 0:
            raise UsageError("turn_rate_std and step_amp must be >= 0")
        if not (self.rate_hz > 0 and self.turn_tau > 0 and self.speed_tau > 0):
            raise UsageError("rate_hz, turn_tau and speed_tau must be > 0")

    @property
    def samples(self) -> int:
        return int(round(self.duration * self.rate_hz))

    def to_json(self) -> dict[str, Any]:
        return asdict(self)

    @staticmethod
    def from_section(section: Section, **overrides: Any) -> "WalkParams":
        known = {f.name: f.type for f in fields(WalkParams)}
        kwargs: dict[str, Any] = {}
        for key, value in section.data.items():
            kind = known.get(key)
            if not isinstance(kind, type):
                raise UsageError(f"Unknown walk key '{key}'")
            kwargs[key] = coerce_value(key, value, kind)
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return WalkParams(**kwargs)


@dataclass(frozen=True)
class WalkTrace:
    """N IMU-rate samples of nav-frame motion; poses and velocity carry N+1 rows."""

    poses: PoseTrack
    nav_acc: np.ndarray
    nav_gyro: np.ndarray
    nav_vel: np.ndarray
    speed: np.ndarray
    distance: float
    rate_hz: float

    def __iter__(self) -> Iterator[Any]:
        return iter((self.poses, self.nav_acc, self.nav_gyro))


@dataclass(frozen=True)
class DomainTransform:
    name: str
    rot: UnitQuaternion = field(default_factory=UnitQuaternion.identity)
    sway_amp: float = 0.0
    sway_freq: float = 0.0
    gyro_bias: tuple[float, float, float] = (0.0, 0.0, 0.0)
    acc_bias: tuple[float, float, float] = (0.0, 0.0, 0.0)
    noise_gyro: float = 0.0
    noise_acc: float = 0.0
    bounce_gain: float = 1.0

    def __post_init__(self):
        if self.noise_gyro < 0 or self.noise_acc < 0:
            raise UsageError("noise parameters must be >= 0")
        if self.sway_amp < 0 or self.sway_freq < 0 or self.bounce_gain < 0:
            raise UsageError("sway and bounce parameters must be >= 0")


@dataclass(frozen=True)
class GroundTruthBundle:
    imu: ImuSequence
    poses: PoseTrack
    domain: DomainTag
    nav_vel: np.ndarray
    attitude: np.ndarray

    def attitude_at(self, k: int) -> UnitQuaternion:
        return UnitQuaternion.from_array(self.attitude[k])


@dataclass(frozen=True)
class DomainBundles:
    source: GroundTruthBundle
    target: GroundTruthBundle
    target_eval: GroundTruthBundle


def _euler_quat(angles: Sequence[float]) -> UnitQuaternion:
    x, y, z, w = Rotation.from_euler("xyz", angles).as_quat()
    return UnitQuaternion.from_array(np.array([w, x, y, z]))


PRESETS: dict[str, DomainTransform] = {
    "identity": DomainTransform(name="identity"),
    "synthetic-handheld": DomainTransform(
        name="synthetic-handheld",
        rot=_euler_quat((0.05, 0.2, 0.0)),
        sway_amp=0.05,
        sway_freq=1.0,
        gyro_bias=(0.002, -0.001, 0.003),
        acc_bias=(0.02, -0.01, 0.03),
        noise_gyro=0.005,
        noise_acc=0.05,
        bounce_gain=1.0,
    ),
    "synthetic-pocket": DomainTransform(
        name="synthetic-pocket",
        rot=_euler_quat((1.4, 0.3, 2.1)),
        sway_amp=0.3,
        sway_freq=1.0,
        gyro_bias=(0.01, -0.02, 0.015),
        acc_bias=(0.1, -0.05, 0.08),
        noise_gyro=0.02,
        noise_acc=0.15,
        bounce_gain=1.5,
    ),
    "synthetic-handbag": DomainTransform(
        name="synthetic-handbag",
        rot=_euler_quat((0.6, -0.4, 0.9)),
        sway_amp=0.4,
        sway_freq=1.0,
        gyro_bias=(-0.008, 0.012, 0.01),
        acc_bias=(-0.06, 0.09, 0.05),
        noise_gyro=0.015,
        noise_acc=0.1,
        bounce_gain=0.6,
    ),
    "synthetic-trolley": DomainTransform(
        name="synthetic-trolley",
        rot=_euler_quat((0.0, 0.1, 0.0)),
        gyro_bias=(0.001, 0.001, -0.002),
        acc_bias=(0.01, 0.01, -0.01),
        noise_gyro=0.002,
        noise_acc=0.02,
        bounce_gain=0.0,
    ),
}


def preset(name: str) -> DomainTransform:
    if name not in PRESETS:
        raise UsageError(f"Unknown domain preset '{name}', expected one of {sorted(PRESETS)}")
    return PRESETS[name]


def _ou_spline(rng: np.random.Generator, std: float, tau: float, t_lo: float, t_hi: float) -> CubicSpline:
    """Stationary Ornstein-Uhlenbeck knots every tau/4, cubic-spline interpolated."""
    step = tau / 4.0
    count = int(math.ceil((t_hi - t_lo) / step)) + 3
    knots = t_lo - step + step * np.arange(count)
    decay = math.exp(-step / tau)
    noise = rng.standard_normal(count)
    tail, _ = lfilter([math.sqrt(1.0 - decay**2)], [1.0, -decay], noise[1:], zi=[decay * noise[0]])
    values = np.concatenate([noise[:1], tail])
    return CubicSpline(knots, std * values)


def simulate_walk(params: WalkParams) -> WalkTrace:
    dt = 1.0 / params.rate_hz
    n = params.samples
    rng = np.random.default_rng(params.seed)
    t_lo, t_hi = -_PAD * dt, (n + _PAD) * dt
    turn = _ou_spline(rng, params.turn_rate_std, params.turn_tau, t_lo, t_hi)
    speed_shape = _ou_spline(rng, 1.0, params.speed_tau, t_lo, t_hi)
    heading = turn.antiderivative()
    psi_origin = float(heading(0.0))

    def speed_at(t: np.ndarray) -> np.ndarray:
        return params.speed_mean + params.speed_jitter * np.tanh(speed_shape(t))

    steps = n + 2 * _PAD
    fine = np.linspace(t_lo, t_hi, steps * _OVERSAMPLE + 1)
    psi_fine = heading(fine) - psi_origin
    v_fine = speed_at(fine)
    x_fine = cumulative_trapezoid(v_fine * np.cos(psi_fine), fine, initial=0.0)
    y_fine = cumulative_trapezoid(v_fine * np.sin(psi_fine), fine, initial=0.0)
    travelled = cumulative_trapezoid(v_fine, fine, initial=0.0)

    idx = np.arange(steps + 1) * _OVERSAMPLE
    pos = np.column_stack([x_fine[idx], y_fine[idx]])
    pos -= pos[_PAD]
    distance = float(travelled[idx[_PAD + n]] - travelled[idx[_PAD]])

    k = np.arange(n + 1)
    t = k * dt
    psi = heading(t) - psi_origin
    centre = _PAD + k
    vel_xy = (pos[centre + 1] - pos[centre - 1]) / (2.0 * dt)
    acc_xy = (pos[centre[:-1] + 1] - 2.0 * pos[centre[:-1]] + pos[centre[:-1] - 1]) / dt**2

    omega = 2.0 * math.pi * params.step_freq
    nav_acc = np.column_stack([acc_xy, params.step_amp * np.sin(omega * t[:-1])])
    nav_vel = np.column_stack([vel_xy, params.step_amp / omega * (1.0 - np.cos(omega * t))])
    nav_gyro = np.zeros((n, 3))
    nav_gyro[:, 2] = np.diff(psi) / dt

    poses = PoseTrack(t=t, x=pos[_PAD:, 0][: n + 1], y=pos[_PAD:, 1][: n + 1], psi=wrap_angles(psi))
    logger.debug(f"Simulated {params.duration:g}s walk (seed {params.seed}), {distance:.2f} m travelled")
    return WalkTrace(
        poses=poses,
        nav_acc=nav_acc,
        nav_gyro=nav_gyro,
        nav_vel=nav_vel,
        speed=speed_at(t),
        distance=distance,
        rate_hz=params.rate_hz,
    )


def device_attitude(psi: np.ndarray, t: np.ndarray, transform: DomainTransform) -> Rotation:
    q = transform.rot
    mount = Rotation.from_quat([q.qx, q.qy, q.qz, q.qw])
    sway = Rotation.from_euler("x", transform.sway_amp * np.sin(2.0 * math.pi * transform.sway_freq * t))
    return Rotation.from_euler("z", psi) * mount * sway


def _render(
    poses: PoseTrack,
    nav_acc: np.ndarray,
    nav_gyro: np.ndarray,
    transform: DomainTransform,
    g: Any,
    seed: Any,
    rate_hz: float,
) -> tuple[ImuSequence, np.ndarray]:
    nav_acc = np.asarray(nav_acc, dtype=np.float64)
    nav_gyro = np.asarray(nav_gyro, dtype=np.float64)
    n = len(nav_acc)
    if len(nav_gyro) != n or len(poses) != n + 1:
        raise UsageError(f"render_imu needs N accelerations, N rates and N+1 poses, got {len(nav_acc)}, {len(nav_gyro)}, {len(poses)}")
    dt = 1.0 / rate_hz
    psi = np.concatenate([[poses.psi[0]], poses.psi[0] + np.cumsum(nav_gyro[:, 2]) * dt])
    attitude = device_attitude(psi, poses.t, transform)
    step = attitude[:-1].inv() * attitude[1:]
    w = step.as_rotvec() / dt

    specific = nav_acc * np.array([1.0, 1.0, transform.bounce_gain]) + np.asarray(g, dtype=np.float64).reshape(3)
    a = attitude[:-1].apply(specific, inverse=True)

    rng = np.random.default_rng(seed)
    w = w + np.asarray(transform.gyro_bias) + transform.noise_gyro * rng.standard_normal((n, 3))
    a = a + np.asarray(transform.acc_bias) + transform.noise_acc * rng.standard_normal((n, 3))

    xyzw = attitude.as_quat()
    wxyz = np.column_stack([xyzw[:, 3], xyzw[:, :3]])
    return ImuSequence(t=poses.t[:n], w=w, a=a, rate_hz=rate_hz), wxyz


def render_imu(
    poses: PoseTrack,
    nav_acc: np.ndarray,
    nav_gyro: np.ndarray,
    transform: DomainTransform,
    g: Any = DEFAULT_GRAVITY,
    seed: Any = 0,
    rate_hz: float = 100.0,
) -> ImuSequence:
    imu, _ = _render(poses, nav_acc, nav_gyro, transform, g, seed, rate_hz)
    return imu


def generate_bundle(
    walk: WalkParams,
    transform: DomainTransform,
    domain: DomainTag | None = None,
    g: Any = DEFAULT_GRAVITY,
) -> GroundTruthBundle:
    trace = simulate_walk(walk)
    seed = [walk.seed, stable_key(transform.name)]
    imu, attitude = _render(trace.poses, trace.nav_acc, trace.nav_gyro, transform, g, seed, walk.rate_hz)
    return GroundTruthBundle(
        imu=imu,
        poses=trace.poses,
        domain=domain or DomainTag(transform.name),
        nav_vel=trace.nav_vel,
        attitude=attitude,
    )


def export_bundle(bundle: GroundTruthBundle, directory: Path, with_poses: bool = True) -> DatasetManifest:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_imu_csv(bundle.imu, directory / "imu.csv")
    poses_path = None
    if with_poses:
        poses_path = directory / "poses.csv"
        write_pose_csv(bundle.poses, poses_path)
    manifest = DatasetManifest(imu=directory / "imu.csv", poses=poses_path, domain=bundle.domain.name, rate=bundle.imu.rate_hz)
    manifest.write(directory / "manifest.txt")
    return manifest


def _with_seed(walk: WalkParams, seed: int, duration: float | None = None) -> WalkParams:
    if duration is None:
        return replace(walk, seed=seed)
    return replace(walk, seed=seed, duration=duration)


def make_domain_bundles(
    walk: WalkParams,
    source_transform: DomainTransform,
    target_transform: DomainTransform,
    target_seed: int | None = None,
    eval_seed: int | None = None,
    eval_duration: float | None = None,
) -> DomainBundles:
    """Source, target and held-out target recordings from independently seeded walks."""
    if source_transform.name == target_transform.name:
        raise UsageError(f"Source and target domains must differ, both are '{source_transform.name}'")
    target_seed = walk.seed + 1 if target_seed is None else target_seed
    eval_seed = walk.seed + 2 if eval_seed is None else eval_seed
    if len({walk.seed, target_seed, eval_seed}) != 3:
        raise UsageError(f"Walk seeds must be distinct to keep domains unpaired, got source={walk.seed} target={target_seed} eval={eval_seed}")
    eval_duration = walk.duration / 5.0 if eval_duration is None else eval_duration
    jobs = [
        (walk, source_transform),
        (_with_seed(walk, target_seed), target_transform),
        (_with_seed(walk, eval_seed, eval_duration), target_transform),
    ]
    with ThreadPoolExecutor(max_workers=worker_count(len(jobs))) as executor:
        futures = [executor.submit(generate_bundle, w, t) for w, t in jobs]
        source, target, target_eval = (f.result() for f in futures)
    return DomainBundles(source=source, target=target, target_eval=target_eval)


def make_domain_pair(
    walk: WalkParams,
    source_transform: DomainTransform,
    target_transform: DomainTransform,
    n: int = 200,
    stride: int = 200,
    target_seed: int | None = None,
    eval_seed: int | None = None,
    eval_duration: float | None = None,
) -> tuple[list[LabelledWindow], list[Window], list[LabelledWindow]]:
    bundles = make_domain_bundles(walk, source_transform, target_transform, target_seed, eval_seed, eval_duration)
    source = make_labelled_windows(bundles.source.imu, bundles.source.poses, n, stride, bundles.source.domain)
    # target training windows never see their poses
    target = make_windows(bundles.target.imu, n, stride, bundles.target.domain)
    target_eval = make_labelled_windows(bundles.target_eval.imu, bundles.target_eval.poses, n, stride, bundles.target_eval.domain)
    logger.info(f"Domain pair {source_transform.name} -> {target_transform.name}: {len(source)} source, {len(target)} target, {len(target_eval)} eval windows")
    return source, target, target_eval


def generate_presets(
    walk: WalkParams,
    names: Sequence[str] = DEFAULT_PRESETS,
    eval_duration: float | None = None,
) -> dict[str, tuple[GroundTruthBundle, GroundTruthBundle]]:
    """Train and eval recordings per preset; every walk has its own seed."""
    eval_duration = walk.duration / 5.0 if eval_duration is None else eval_duration
    jobs: list[tuple[str, WalkParams, DomainTransform]] = []
    for i, name in enumerate(names):
        transform = preset(name)
        jobs.append((name, _with_seed(walk, walk.seed + 10 * i), transform))
        jobs.append((name, _with_seed(walk, walk.seed + 10 * i + 5, eval_duration), transform))
    with ThreadPoolExecutor(max_workers=worker_count(len(jobs))) as executor:
        futures = [executor.submit(generate_bundle, w, t) for _, w, t in jobs]
        results = [f.result() for f in futures]
    out: dict[str, tuple[GroundTruthBundle, GroundTruthBundle]] = {}
    for i, name in enumerate(names):
        out[name] = (results[2 * i], results[2 * i + 1])
    return out
