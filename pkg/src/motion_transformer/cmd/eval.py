import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from motion_transformer.cmd.common import CommonArgs, add_common_arguments, command_run, common_from_namespace, exit_code
from motion_transformer.dataio import load_recording, make_labelled_windows
from motion_transformer.models import load_bundle
from motion_transformer.training import evaluate, predict_windows, predictions_frame
from motion_transformer.types import EvalMode, MotionTransformerError, UsageError

logger = logging.getLogger(__name__)

REPORT_NAME = "eval_report.csv"


@dataclass
class Args:
    common: CommonArgs
    checkpoint: Path
    data: Path
    mode: EvalMode | None
    window: int | None
    stride: int | None


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--checkpoint", help="Model checkpoint written by train", type=Path, required=True)
    parser.add_argument("--data", help="Labelled evaluation dataset directory or manifest.txt", type=Path, required=True)
    parser.add_argument("--mode", help="Expected training mode of the checkpoint", choices=[m.value for m in EvalMode], default=None)
    parser.add_argument("--window", help="Window length in frames (default: the checkpoint's)", type=int, default=None)
    parser.add_argument("--stride", help="Window stride in frames (default: the window length)", type=int, default=None)


def args_from_namespace(args: argparse.Namespace) -> Args:
    return Args(
        common=common_from_namespace(args),
        checkpoint=args.checkpoint,
        data=args.data,
        mode=EvalMode(args.mode) if args.mode else None,
        window=args.window,
        stride=args.stride,
    )


def run(args: Args) -> Exception | None:
    try:
        loaded = load_bundle(args.checkpoint)
        if args.mode is not None and args.mode is not loaded.mode:
            raise UsageError(f"Checkpoint {args.checkpoint} holds a {loaded.mode.value} model, not {args.mode.value}")
        window = args.window or loaded.bundle.arch.window
        stride = args.stride or window
        config = {"mode": loaded.mode.value, "window": window, "stride": stride}
        seed = loaded.bundle.seed if args.common.seed is None else args.common.seed
        with command_run("eval", args.common, seed, config, {"checkpoint": args.checkpoint, "data": args.data}) as ctx:
            recording = load_recording(args.data)
            if recording.poses is None:
                raise UsageError(f"Evaluation recording {args.data} has no pose file")
            windows = make_labelled_windows(recording.imu, recording.poses, window, stride, recording.domain)
            if not windows:
                raise UsageError(f"Evaluation recording is shorter than one {window}-frame window")
            report = evaluate(loaded.bundle, windows)
            report.write(ctx.path(REPORT_NAME), loaded.mode.value)
            predictions_frame(windows, predict_windows(loaded.bundle, windows)).to_csv(
                ctx.path("predictions.csv"), index=False, float_format="%.17g", lineterminator="\n"
            )
            ctx.record_eval(loaded.mode.value, report)
    except (MotionTransformerError, OSError) as e:
        return e
    return None


def _parse_args(argv: list[str] | None = None) -> Args:
    parser = argparse.ArgumentParser(description="Score a checkpoint on a labelled recording.")
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
