"""
Ingestion, windowing, labelling and normalisation of IMU recordings.

IMU CSV:  t,wx,wy,wz,ax,ay,az   (s, rad/s, m/s^2)
Pose CSV: t,x,y,psi             (s, m, m, rad)

A window of n frames starting at t_start spans [t_start, t_start + n/rate],
so pose files carry one more row than their IMU file (the closing boundary).
"""

import logging
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence, TypeVar

import numpy as np
import pandas as pd

from motion_transformer.config import DatasetManifest
from motion_transformer.imu_core import ImuSample
from motion_transformer.types import (
    DataError,
    DomainTag,
    PolarVector,
    PoseSample,
    UsageError,
    wrap_angle,
    wrap_angles,
)

logger = logging.getLogger(__name__)

IMU_COLUMNS = ("t", "wx", "wy", "wz", "ax", "ay", "az")
POSE_COLUMNS = ("t", "x", "y", "psi")
CHANNELS = 6
STD_FLOOR = 1e-6
_RATE_TOLERANCE = 0.10
_FLOAT_FORMAT = "%.17g"

T = TypeVar("T")


@dataclass(frozen=True)
class ImuSequence:
    """Timestamped sensor-frame gyro and accelerometer streams."""

    t: np.ndarray
    w: np.ndarray
    a: np.ndarray
    rate_hz: float = 100.0

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64).reshape(-1)
        w = np.asarray(self.w, dtype=np.float64).reshape(-1, 3)
        a = np.asarray(self.a, dtype=np.float64).reshape(-1, 3)
        if not (len(t) == len(w) == len(a)):
            raise UsageError(f"ImuSequence length mismatch: t={len(t)} w={len(w)} a={len(a)}")
        if not self.rate_hz > 0:
            raise UsageError(f"rate_hz must be positive, got {self.rate_hz}")
        _check_finite(np.column_stack([t, w, a]), "IMU")
        _check_increasing(t, "IMU")
        if len(t) >= 2:
            median_dt = float(np.median(np.diff(t)))
            nominal = 1.0 / self.rate_hz
            if abs(median_dt - nominal) >= _RATE_TOLERANCE * nominal:
                raise DataError(f"Median sample period {median_dt:.6g}s is not within 10% of 1/{self.rate_hz:g} Hz")
        for arr in (t, w, a):
            arr.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "a", a)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def dt(self) -> float:
        return 1.0 / self.rate_hz

    @property
    def samples(self) -> list[ImuSample]:
        return [ImuSample(t=float(self.t[i]), w=tuple(self.w[i]), a=tuple(self.a[i])) for i in range(len(self))]  # type: ignore[arg-type]

    @staticmethod
    def from_samples(samples: Sequence[ImuSample], rate_hz: float = 100.0) -> "ImuSequence":
        return ImuSequence(
            t=np.array([s.t for s in samples], dtype=np.float64),
            w=np.array([s.w for s in samples], dtype=np.float64).reshape(-1, 3),
            a=np.array([s.a for s in samples], dtype=np.float64).reshape(-1, 3),
            rate_hz=rate_hz,
        )


@dataclass(frozen=True)
class PoseTrack:
    """Array view over a pose sequence for fast lookup."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    psi: np.ndarray

    @staticmethod
    def from_samples(poses: "Sequence[PoseSample] | PoseTrack") -> "PoseTrack":
        if isinstance(poses, PoseTrack):
            return poses
        if len(poses) == 0:
            raise DataError("Empty pose sequence")
        return PoseTrack(
            t=np.array([p.t for p in poses], dtype=np.float64),
            x=np.array([p.x for p in poses], dtype=np.float64),
            y=np.array([p.y for p in poses], dtype=np.float64),
            psi=np.array([p.psi for p in poses], dtype=np.float64),
        )

    def samples(self) -> list[PoseSample]:
        return [PoseSample(float(t), float(x), float(y), float(p)) for t, x, y, p in zip(self.t, self.x, self.y, self.psi)]

    def __len__(self) -> int:
        return len(self.t)

    def covers(self, t0: float, t1: float) -> bool:
        tol = 1e-9 * max(1.0, abs(t1))
        return t0 >= self.t[0] - tol and t1 <= self.t[-1] + tol

    def at(self, t: float) -> PoseSample:
        """Linear interpolation of x, y and shortest-arc interpolation of psi."""
        if not self.covers(t, t):
            raise DataError(f"Time {t:.6f}s is outside pose range [{self.t[0]:.6f}, {self.t[-1]:.6f}]")
        t = min(max(t, float(self.t[0])), float(self.t[-1]))
        i = int(np.searchsorted(self.t, t, side="left"))
        if i < len(self.t) and self.t[i] == t:
            return PoseSample(t, float(self.x[i]), float(self.y[i]), float(self.psi[i]))
        i0, i1 = i - 1, i
        frac = (t - self.t[i0]) / (self.t[i1] - self.t[i0])
        x = self.x[i0] + frac * (self.x[i1] - self.x[i0])
        y = self.y[i0] + frac * (self.y[i1] - self.y[i0])
        psi = self.psi[i0] + frac * wrap_angle(float(self.psi[i1] - self.psi[i0]))
        return PoseSample(t, float(x), float(y), wrap_angle(float(psi)))


@dataclass(frozen=True)
class Window:
    """n x 6 frames (ax, ay, az, wx, wy, wz) from one domain."""

    frames: np.ndarray
    domain: DomainTag
    t_start: float
    rate_hz: float = 100.0

    def __post_init__(self):
        frames = np.array(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[1] != CHANNELS:
            raise UsageError(f"Window frames must be (n, 6), got {frames.shape}")
        _check_finite(frames, "Window")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    @property
    def n(self) -> int:
        return int(self.frames.shape[0])

    @property
    def t_end(self) -> float:
        return self.t_start + self.n / self.rate_hz

    def with_frames(self, frames: np.ndarray) -> "Window":
        return Window(frames=frames, domain=self.domain, t_start=self.t_start, rate_hz=self.rate_hz)


@dataclass(frozen=True)
class LabelledWindow:
    window: Window
    label: PolarVector

    @property
    def t_start(self) -> float:
        return self.window.t_start


@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(CHANNELS)
        std = np.asarray(self.std, dtype=np.float64).reshape(CHANNELS)
        if np.any(std <= 0):
            raise UsageError("NormStats std must be positive on every channel")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def apply(self, frames: np.ndarray) -> np.ndarray:
        return (frames - self.mean) / self.std

    def invert(self, frames: np.ndarray) -> np.ndarray:
        return frames * self.std + self.mean


@dataclass(frozen=True)
class Recording:
    imu: ImuSequence
    poses: PoseTrack | None
    domain: DomainTag


def _check_finite(values: np.ndarray, what: str) -> None:
    bad = ~np.isfinite(values)
    if np.any(bad):
        row = int(np.argwhere(bad)[0][0]) + 1
        raise DataError(f"{what} data has a non-finite value at row {row}")


def _check_increasing(t: np.ndarray, what: str) -> None:
    if len(t) and t[0] < 0:
        raise DataError(f"{what} timestamps must be non-negative (row 1)")
    steps = np.diff(t)
    if np.any(steps <= 0):
        # diff index i compares rows i+1 and i+2 (1-based)
        row = int(np.argmax(steps <= 0)) + 2
        raise DataError(f"{what} timestamps are not strictly increasing at row {row}")


def _numeric_column(column: pd.Series) -> pd.Series:
    """Parsed floats as-is; anything else is coerced so bad cells become NaN."""
    if pd.api.types.is_numeric_dtype(column) and not pd.api.types.is_bool_dtype(column):
        return column.astype(np.float64)
    return pd.to_numeric(column.astype(str).str.strip(), errors="coerce")


def _read_csv(path: Path, columns: Sequence[str]) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise DataError(f"File not found: {path}")
    try:
        frame = pd.read_csv(path, skipinitialspace=True, float_precision="round_trip")
    except pd.errors.EmptyDataError as e:
        raise DataError(f"{path} is empty") from e
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise DataError(f"{path} is missing column(s): {', '.join(missing)}")
    if len(frame) == 0:
        raise DataError(f"{path} has no data rows")
    out = pd.DataFrame({c: _numeric_column(frame[c]) for c in columns})
    values = out.to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values)
    if np.any(bad):
        row, col = (int(v) for v in np.argwhere(bad)[0])
        raise DataError(f"{path}: row {row + 1} column '{columns[col]}' is not a finite number")
    return out


def load_imu_csv(path: Path, rate_hz: float | None = None) -> ImuSequence:
    frame = _read_csv(path, IMU_COLUMNS)
    t = frame["t"].to_numpy(dtype=np.float64)
    _check_increasing(t, str(path))
    if rate_hz is None:
        if len(t) < 2:
            raise DataError(f"{path}: cannot infer the sample rate from fewer than 2 rows")
        rate_hz = float(round(1.0 / float(np.median(np.diff(t)))))
    return ImuSequence(
        t=t,
        w=frame[["wx", "wy", "wz"]].to_numpy(dtype=np.float64),
        a=frame[["ax", "ay", "az"]].to_numpy(dtype=np.float64),
        rate_hz=rate_hz,
    )


def load_pose_csv(path: Path) -> list[PoseSample]:
    return load_pose_track(path).samples()


def load_pose_track(path: Path) -> PoseTrack:
    frame = _read_csv(path, POSE_COLUMNS)
    t = frame["t"].to_numpy(dtype=np.float64)
    _check_increasing(t, str(path))
    return PoseTrack(
        t=t,
        x=frame["x"].to_numpy(dtype=np.float64),
        y=frame["y"].to_numpy(dtype=np.float64),
        psi=wrap_angles(frame["psi"].to_numpy(dtype=np.float64)),
    )


def write_imu_csv(seq: ImuSequence, path: Path) -> None:
    frame = pd.DataFrame(np.column_stack([seq.t, seq.w, seq.a]), columns=list(IMU_COLUMNS))
    frame.to_csv(path, index=False, float_format=_FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")


def write_pose_csv(poses: "Sequence[PoseSample] | PoseTrack", path: Path) -> None:
    track = PoseTrack.from_samples(poses)
    frame = pd.DataFrame(np.column_stack([track.t, track.x, track.y, track.psi]), columns=list(POSE_COLUMNS))
    frame.to_csv(path, index=False, float_format=_FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")


def load_recording(manifest_path: Path) -> Recording:
    manifest = DatasetManifest.from_file(Path(manifest_path))
    imu = load_imu_csv(manifest.imu, rate_hz=manifest.rate)
    poses = load_pose_track(manifest.poses) if manifest.poses is not None else None
    logger.info(f"Loaded {len(imu)} IMU samples for domain {manifest.domain} from {manifest.imu}")
    return Recording(imu=imu, poses=poses, domain=DomainTag(manifest.domain))


def make_windows(seq: ImuSequence, n: int, stride: int, domain: DomainTag) -> list[Window]:
    if n < 1 or stride < 1:
        raise UsageError(f"make_windows needs n >= 1 and stride >= 1, got n={n} stride={stride}")
    length = len(seq)
    if length < n:
        return []
    count = (length - n) // stride + 1
    frames = np.column_stack([seq.a, seq.w])
    out: list[Window] = []
    for k in range(count):
        start = k * stride
        out.append(Window(frames=frames[start : start + n], domain=domain, t_start=float(seq.t[start]), rate_hz=seq.rate_hz))
    return out


def polar_from_poses(start: Any, end: Any) -> PolarVector:
    """Chord length and wrapped heading change between two poses."""
    dl = math.hypot(end.x - start.x, end.y - start.y)
    return PolarVector(dl=dl, dpsi=wrap_angle(end.psi - start.psi))


def label_window(window: Window, poses: "Sequence[PoseSample] | PoseTrack") -> PolarVector:
    track = PoseTrack.from_samples(poses)
    t0, t1 = window.t_start, window.t_end
    if not track.covers(t0, t1):
        raise DataError(f"Window [{t0:.6f}, {t1:.6f}]s is not covered by poses [{track.t[0]:.6f}, {track.t[-1]:.6f}]s")
    return polar_from_poses(track.at(t0), track.at(t1))


def make_labelled_windows(
    seq: ImuSequence,
    poses: "Sequence[PoseSample] | PoseTrack",
    n: int,
    stride: int,
    domain: DomainTag,
) -> list[LabelledWindow]:
    track = PoseTrack.from_samples(poses)
    out: list[LabelledWindow] = []
    dropped = 0
    for window in make_windows(seq, n, stride, domain):
        if not track.covers(window.t_start, window.t_end):
            dropped += 1
            continue
        out.append(LabelledWindow(window=window, label=label_window(window, track)))
    if dropped:
        warnings.warn(f"Dropped {dropped} window(s) of {domain} not covered by poses")
    return out


def _frames_of(item: "Window | LabelledWindow") -> np.ndarray:
    return item.window.frames if isinstance(item, LabelledWindow) else item.frames


def fit_norm_stats(windows: "Sequence[Window | LabelledWindow]") -> NormStats:
    if len(windows) < 2:
        raise UsageError(f"fit_norm_stats needs at least 2 windows, got {len(windows)}")
    stacked = np.concatenate([_frames_of(w) for w in windows], axis=0)
    mean = stacked.mean(axis=0)
    std = np.maximum(stacked.std(axis=0), STD_FLOOR)
    return NormStats(mean=mean, std=std)


def apply_norm(window: Window, stats: NormStats) -> Window:
    return window.with_frames(stats.apply(window.frames))


def invert_norm(window: Window, stats: NormStats) -> Window:
    return window.with_frames(stats.invert(window.frames))


def stack_frames(windows: "Sequence[Window | LabelledWindow]", stats: NormStats | None = None) -> np.ndarray:
    """(N, n, 6) batch array, normalised when stats are given."""
    if len(windows) == 0:
        raise UsageError("Cannot stack an empty window list")
    out = np.stack([_frames_of(w) for w in windows], axis=0)
    return stats.apply(out) if stats is not None else out


def stack_labels(windows: Sequence[LabelledWindow]) -> np.ndarray:
    return np.array([[w.label.dl, w.label.dpsi] for w in windows], dtype=np.float64).reshape(-1, 2)


def _t_start_of(item: Any) -> float:
    return float(item.t_start)


def split_dataset(items: Sequence[T], ratios: tuple[float, float, float], seed: int) -> tuple[list[T], list[T], list[T]]:
    """Train/validation are a seeded shuffle; test is the final time-contiguous block."""
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise UsageError(f"ratios must be three non-negative values summing to 1, got {ratios}")
    ordered = sorted(items, key=_t_start_of)
    total = len(ordered)
    n_test = int(round(total * ratios[2]))
    n_val = int(round(total * ratios[1]))
    n_val = min(n_val, total - n_test)
    test = ordered[total - n_test :] if n_test else []
    rest = ordered[: total - n_test]
    perm = np.random.default_rng(seed).permutation(len(rest))
    shuffled = [rest[i] for i in perm]
    return shuffled[n_val:], shuffled[:n_val], test
