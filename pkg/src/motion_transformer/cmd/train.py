import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from motion_transformer.cmd.common import CommonArgs, add_common_arguments, command_run, common_from_namespace, exit_code
from motion_transformer.config import TrainConfig
from motion_transformer.dataio import Recording, load_recording, make_labelled_windows, make_windows
from motion_transformer.models import ModelBundle, save_bundle
from motion_transformer.training import train_adapt, train_supervised
from motion_transformer.types import EvalMode, MotionTransformerError, UsageError

logger = logging.getLogger(__name__)

MODEL_NAME = "model.ckpt"


@dataclass
class Args:
    common: CommonArgs
    source: Path
    target: Path | None
    mode: EvalMode
    steps: int | None


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--source", help="Source dataset directory or manifest.txt (labelled)", type=Path, required=True)
    parser.add_argument("--target", help="Target dataset directory or manifest.txt", type=Path, default=None)
    parser.add_argument(
        "--mode",
        help="adapted: adversarial adaptation; source-only / target-only: supervised baselines",
        choices=[m.value for m in EvalMode],
        default=EvalMode.ADAPTED.value,
    )
    parser.add_argument("--steps", help="Override the configured number of steps", type=int, default=None)


def args_from_namespace(args: argparse.Namespace) -> Args:
    return Args(
        common=common_from_namespace(args),
        source=args.source,
        target=args.target,
        mode=EvalMode(args.mode),
        steps=args.steps,
    )


def load_train_config(common: CommonArgs, steps: int | None = None) -> TrainConfig:
    if common.config is None:
        raise UsageError("train needs --config")
    return TrainConfig.from_file(common.config).with_overrides(seed=common.seed, steps=steps)


def _labelled(recording: Recording, config: TrainConfig, what: str):
    if recording.poses is None:
        raise UsageError(f"{what} recording of domain '{recording.domain}' has no pose file, labels are required")
    return make_labelled_windows(recording.imu, recording.poses, config.window, config.stride, recording.domain)


def run(args: Args) -> Exception | None:
    try:
        config = load_train_config(args.common, args.steps)
        if args.mode is not EvalMode.SOURCE_ONLY and args.target is None:
            raise UsageError(f"{args.mode.value} training needs --target")
        inputs = {"config": args.common.config, "source": args.source, "target": args.target}
        with command_run("train", args.common, config.seed, {**config.to_dict(), "mode": args.mode.value}, inputs) as ctx:
            ctx.path("config.conf").write_text(config.to_text(), encoding="utf-8")
            checkpoints = ctx.path("checkpoints")

            def on_checkpoint(step: int, bundle: ModelBundle) -> None:
                checkpoints.mkdir(exist_ok=True)
                save_bundle(checkpoints / f"step-{step:06d}.ckpt", bundle, args.mode, extra={"step": step})

            if args.mode is EvalMode.ADAPTED:
                assert args.target is not None
                source = _labelled(load_recording(args.source), config, "Source")
                target_recording = load_recording(args.target)
                # target poses are never read here
                target = make_windows(target_recording.imu, config.window, config.stride, target_recording.domain)
                bundle, history = train_adapt(source, target, config, on_checkpoint=on_checkpoint)
            elif args.mode is EvalMode.SOURCE_ONLY:
                source = _labelled(load_recording(args.source), config, "Source")
                bundle, history = train_supervised(source, config, on_checkpoint=on_checkpoint)
            else:
                assert args.target is not None
                target_labelled = _labelled(load_recording(args.target), config, "Target")
                bundle, history = train_supervised(target_labelled, config, on_checkpoint=on_checkpoint)

            save_bundle(ctx.path(MODEL_NAME), bundle, args.mode, extra={"step": config.steps, "experiment_id": ctx.experiment_id})
            history.write_csv(ctx.path("history.csv"))
            history.write_val_csv(ctx.path("val_history.csv"))
            logger.info(f"Trained {args.mode.value} model for {config.steps} steps")
    except (MotionTransformerError, OSError) as e:
        return e
    return None


def _parse_args(argv: list[str] | None = None) -> Args:
    parser = argparse.ArgumentParser(description="Train an adapted model or a supervised baseline.")
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
