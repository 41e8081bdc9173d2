import argparse
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from motion_transformer.cmd.common import CommonArgs, add_common_arguments, command_run, common_from_namespace, exit_code
from motion_transformer.dataio import PoseTrack, Window, label_window, load_imu_csv, load_pose_track, make_windows
from motion_transformer.models import LoadedModel, load_bundle
from motion_transformer.tracking import Trajectory, ate, dead_reckon, plot_trajectories, resample_gt, window_boundaries
from motion_transformer.training import predict_windows
from motion_transformer.types import DomainTag, MotionTransformerError, Pose2D, UsageError

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 200


@dataclass
class Args:
    common: CommonArgs
    imu: Path
    checkpoint: Path | None
    poses: Path | None
    p0: tuple[float, float, float] | None
    oracle_labels: bool
    supervised_checkpoint: Path | None
    window: int | None
    rate: float | None


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--imu", help="IMU CSV to track", type=Path, required=True)
    parser.add_argument("--checkpoint", help="Model checkpoint predicting the polar vectors", type=Path, default=None)
    parser.add_argument("--poses", help="Ground-truth pose CSV for overlay and ATE", type=Path, default=None)
    parser.add_argument("--p0", help="Initial pose x y psi (default: ground truth at the first window, else 0 0 0)", type=float, nargs=3, default=None)
    parser.add_argument("--oracle-labels", help="Replay labels computed from --poses instead of model predictions", action="store_true")
    parser.add_argument("--supervised-checkpoint", help="Second checkpoint plotted as a reference", type=Path, default=None)
    parser.add_argument("--window", help=f"Window length in frames (default: the checkpoint's, {DEFAULT_WINDOW} for oracle replay)", type=int, default=None)
    parser.add_argument("--rate", help="Sample rate in Hz (default: inferred from timestamps)", type=float, default=None)


def args_from_namespace(args: argparse.Namespace) -> Args:
    return Args(
        common=common_from_namespace(args),
        imu=args.imu,
        checkpoint=args.checkpoint,
        poses=args.poses,
        p0=tuple(args.p0) if args.p0 is not None else None,
        oracle_labels=args.oracle_labels,
        supervised_checkpoint=args.supervised_checkpoint,
        window=args.window,
        rate=args.rate,
    )


def _check_args(args: Args) -> None:
    if args.oracle_labels and args.poses is None:
        raise UsageError("--oracle-labels needs --poses")
    if not args.oracle_labels and args.checkpoint is None:
        raise UsageError("track needs --checkpoint unless --oracle-labels is given")


def _model_polars(model: LoadedModel, windows: list[Window]) -> np.ndarray:
    if model.bundle.arch.window != windows[0].n:
        raise UsageError(f"Checkpoint window length is {model.bundle.arch.window} frames, tracking windows have {windows[0].n}")
    return predict_windows(model.bundle, windows)


def _start_pose(args: Args, track: PoseTrack | None, t0: float) -> Pose2D:
    if args.p0 is not None:
        return Pose2D(*args.p0)
    if track is not None:
        return track.at(t0).pose()
    return Pose2D(0.0, 0.0, 0.0)


def run(args: Args) -> Exception | None:
    try:
        _check_args(args)
        model = load_bundle(args.checkpoint) if args.checkpoint is not None and not args.oracle_labels else None
        window = args.window or (model.bundle.arch.window if model is not None else DEFAULT_WINDOW)
        config = {"window": window, "rate": args.rate, "p0": args.p0, "oracle_labels": args.oracle_labels}
        inputs = {"imu": args.imu, "poses": args.poses, "checkpoint": args.checkpoint, "supervised_checkpoint": args.supervised_checkpoint}
        seed = args.common.seed if args.common.seed is not None else 0
        with command_run("track", args.common, seed, config, inputs) as ctx:
            seq = load_imu_csv(args.imu, rate_hz=args.rate)
            windows = make_windows(seq, window, window, DomainTag("track"))
            if not windows:
                raise UsageError(f"IMU stream has {len(seq)} samples, shorter than one {window}-frame window")
            track = load_pose_track(args.poses) if args.poses is not None else None

            if args.oracle_labels:
                assert track is not None
                polars = np.array([label_window(w, track).as_array() for w in windows])
            else:
                assert model is not None
                polars = _model_polars(model, windows)

            dt_window = window / seq.rate_hz
            p0 = _start_pose(args, track, windows[0].t_start)
            estimate = dead_reckon(p0, polars, dt_window=dt_window, t0=windows[0].t_start)
            estimate.write_csv(ctx.path("trajectory.csv"))

            supervised: Trajectory | None = None
            if args.supervised_checkpoint is not None:
                supervised = dead_reckon(p0, _model_polars(load_bundle(args.supervised_checkpoint), windows), dt_window=dt_window, t0=windows[0].t_start)
                supervised.write_csv(ctx.path("trajectory_supervised.csv"))

            ground_truth: Trajectory | None = None
            if track is not None:
                ground_truth = resample_gt(track, window_boundaries(windows))
                ground_truth.write_csv(ctx.path("ground_truth.csv"))
                final_error = math.dist(estimate.xy[-1], ground_truth.xy[-1])
                path_length = ground_truth.path_length
                metrics = {
                    "ate": ate(estimate, ground_truth),
                    "final_error": final_error,
                    "path_length": path_length,
                    "final_error_fraction": final_error / path_length if path_length > 0 else float("nan"),
                }
                pd.DataFrame([metrics]).to_csv(ctx.path("tracking_metrics.csv"), index=False, float_format="%.17g", lineterminator="\n")
                logger.info(f"ATE {metrics['ate']:.3f} m, final error {final_error:.3f} m over {path_length:.1f} m")

            title = "Oracle label replay" if args.oracle_labels else f"{model.mode.value} model" if model is not None else "Trajectory"
            plot_trajectories(ctx.path("trajectory.svg"), estimate, ground_truth, supervised, title=title)
            logger.info(f"Tracked {len(windows)} windows, {len(estimate)} poses")
    except (MotionTransformerError, OSError) as e:
        return e
    return None


def _parse_args(argv: list[str] | None = None) -> Args:
    parser = argparse.ArgumentParser(description="Dead-reckon a trajectory from an IMU recording.")
    add_common_arguments(parser)
    add_arguments(parser)
    return args_from_namespace(parser.parse_args(argv))


def main(argv: list[str] | None = None) -> int:
    """Main entry point."""
    err = run(_parse_args(argv))
    if err is not None:
        print(f"Error: {err}", file=sys.stderr)
    return exit_code(err)


if __name__ == "__main__":
    sys.exit(main())
