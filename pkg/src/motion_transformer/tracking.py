"""
Path integration from per-window polar vectors, trajectory error and plots.

Each step turns first and then moves along the new heading:

    psi_k = wrap(psi_{k-1} + dpsi_k)
    x_k   = x_{k-1} + dl_k * cos(psi_k)
    y_k   = y_{k-1} + dl_k * sin(psi_k)
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import matplotlib
import numpy as np
import pandas as pd
from matplotlib.figure import Figure

from motion_transformer.dataio import LabelledWindow, PoseTrack, Window
from motion_transformer.types import DataError, PolarVector, Pose2D, PoseSample, UsageError, wrap_angle

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ("k", "t", "x", "y", "psi")

# estimate, ground truth, supervised reference
PLOT_COLORS = ("#1f77b4", "#000000", "#ff7f0e")


@dataclass(frozen=True, eq=False)
class Trajectory:
    poses: tuple[Pose2D, ...]
    dt_window: float
    times: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        if len(self.poses) == 0:
            raise UsageError("A trajectory needs at least its initial pose")
        object.__setattr__(self, "poses", tuple(self.poses))
        if self.times is None:
            times = np.arange(len(self.poses), dtype=np.float64) * self.dt_window
        else:
            times = np.asarray(self.times, dtype=np.float64)
            if times.shape != (len(self.poses),):
                raise UsageError(f"Trajectory has {len(self.poses)} poses but {times.shape[0]} times")
        object.__setattr__(self, "times", times)

    def __len__(self) -> int:
        return len(self.poses)

    @property
    def xy(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.poses], dtype=np.float64)

    @property
    def path_length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.xy, axis=0), axis=1)))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "k": np.arange(len(self.poses)),
                "t": self.times,
                "x": [p.x for p in self.poses],
                "y": [p.y for p in self.poses],
                "psi": [p.psi for p in self.poses],
            }
        )

    def write_csv(self, path: Path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")

    @staticmethod
    def read_csv(path: Path) -> "Trajectory":
        try:
            frame = pd.read_csv(path, float_precision="round_trip")
        except (OSError, pd.errors.EmptyDataError) as e:
            raise DataError(f"Cannot read trajectory {path}: {e}") from e
        missing = [c for c in TRAJECTORY_COLUMNS if c not in frame.columns]
        if missing:
            raise DataError(f"Trajectory {path} is missing columns {missing}")
        poses = tuple(Pose2D(float(x), float(y), float(p)) for x, y, p in zip(frame["x"], frame["y"], frame["psi"]))
        times = frame["t"].to_numpy(dtype=np.float64)
        dt = float(times[1] - times[0]) if len(times) > 1 else 0.0
        return Trajectory(poses=poses, dt_window=dt, times=times)


def _polar_array(polars: "Sequence[PolarVector] | np.ndarray") -> np.ndarray:
    if isinstance(polars, np.ndarray):
        arr = np.asarray(polars, dtype=np.float64).reshape(-1, 2)
    else:
        arr = np.array([[p.dl, p.dpsi] for p in polars], dtype=np.float64).reshape(-1, 2)
    if not np.all(np.isfinite(arr)):
        raise UsageError("Polar vectors must be finite")
    negative = np.flatnonzero(arr[:, 0] < 0)
    if negative.size:
        raise UsageError(f"Polar step {int(negative[0])} has negative dl {arr[negative[0], 0]}")
    return arr


def dead_reckon(p0: Pose2D, polars: "Sequence[PolarVector] | np.ndarray", dt_window: float = 2.0, t0: float = 0.0) -> Trajectory:
    steps = _polar_array(polars)
    poses = [p0]
    x, y, psi = p0.x, p0.y, p0.psi
    for dl, dpsi in steps:
        psi = wrap_angle(psi + dpsi)
        x += dl * math.cos(psi)
        y += dl * math.sin(psi)
        poses.append(Pose2D(x, y, psi))
    times = t0 + np.arange(len(poses), dtype=np.float64) * dt_window
    return Trajectory(poses=tuple(poses), dt_window=dt_window, times=times)


def ate(traj: Trajectory, gt: Trajectory) -> float:
    """RMS planar position error; both trajectories share the same anchor."""
    if len(traj) != len(gt):
        raise UsageError(f"ATE needs equal lengths, got {len(traj)} and {len(gt)}; resample the ground truth first")
    err = traj.xy - gt.xy
    return float(np.sqrt(np.mean(np.sum(err**2, axis=1))))


def window_boundaries(windows: Sequence["Window | LabelledWindow"]) -> np.ndarray:
    """Start time of every window plus the end time of the last one."""
    if len(windows) == 0:
        raise UsageError("No windows")
    starts = [w.t_start for w in windows]
    last = windows[-1]
    end = last.window.t_end if isinstance(last, LabelledWindow) else last.t_end
    return np.array(starts + [end], dtype=np.float64)


def resample_gt(poses: "Sequence[PoseSample] | PoseTrack", boundaries: "Sequence[float] | np.ndarray") -> Trajectory:
    track = PoseTrack.from_samples(poses)
    times = np.asarray(boundaries, dtype=np.float64)
    if times.size == 0:
        raise UsageError("No boundaries to resample at")
    out = tuple(track.at(float(t)).pose() for t in times)
    dt = float(times[1] - times[0]) if times.size > 1 else 0.0
    return Trajectory(poses=out, dt_window=dt, times=times)


def plot_trajectories(
    path: Path,
    estimate: Trajectory,
    ground_truth: Trajectory | None = None,
    supervised: Trajectory | None = None,
    title: str = "Trajectory",
) -> None:
    """
    Writes an SVG with equal axis scale in meters.

    Estimate is a solid blue line, ground truth a dashed black line and a
    supervised reference a dotted orange line; the start pose is a green square.
    """
    with matplotlib.rc_context({"svg.hashsalt": "motion-transformer", "svg.fonttype": "none"}):
        fig = Figure(figsize=(6, 6))
        ax = fig.subplots()
        if ground_truth is not None:
            ax.plot(ground_truth.xy[:, 0], ground_truth.xy[:, 1], "--", color=PLOT_COLORS[1], linewidth=1.5, label="ground truth")
        if supervised is not None:
            ax.plot(supervised.xy[:, 0], supervised.xy[:, 1], ":", color=PLOT_COLORS[2], linewidth=1.5, label="supervised")
        xy = estimate.xy
        ax.plot(xy[:, 0], xy[:, 1], "-", color=PLOT_COLORS[0], linewidth=1.5, label="estimate")
        ax.scatter(xy[0, 0], xy[0, 1], c="green", s=40, marker="s", label="start", zorder=3)
        ax.set_xlabel("x (m)")
        ax.set_ylabel("y (m)")
        ax.set_title(title)
        ax.grid(True, alpha=0.3)
        ax.set_aspect("equal", adjustable="datalim")
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
    logger.info(f"Wrote trajectory plot {path}")
