import argparse
import logging
import sys
from dataclasses import dataclass

from motion_transformer.cmd.common import CommonArgs, add_common_arguments, command_run, common_from_namespace, exit_code
from motion_transformer.config import Section, coerce_value, parse_config
from motion_transformer.synth import DEFAULT_PRESETS, PRESETS, WalkParams, export_bundle, generate_presets
from motion_transformer.types import MotionTransformerError, UsageError

logger = logging.getLogger(__name__)


@dataclass
class Args:
    common: CommonArgs
    presets: list[str]
    duration: float | None
    eval_duration: float | None
    rate: float | None
    speed_mean: float | None
    turn_rate_std: float | None
    step_amp: float | None


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--presets", help=f"Domain presets to generate, from {sorted(PRESETS)}", nargs="+", default=list(DEFAULT_PRESETS))
    parser.add_argument("--duration", help="Training recording length in seconds", type=float, default=None)
    parser.add_argument("--eval-duration", help="Held-out recording length in seconds (default duration / 5)", type=float, default=None)
    parser.add_argument("--rate", help="Sample rate in Hz", type=float, default=None)
    parser.add_argument("--speed-mean", help="Mean walking speed in m/s", type=float, default=None)
    parser.add_argument("--turn-rate-std", help="Turn-rate standard deviation in rad/s", type=float, default=None)
    parser.add_argument("--step-amp", help="Vertical step bounce in m/s^2", type=float, default=None)


def args_from_namespace(args: argparse.Namespace) -> Args:
    return Args(
        common=common_from_namespace(args),
        presets=list(args.presets),
        duration=args.duration,
        eval_duration=args.eval_duration,
        rate=args.rate,
        speed_mean=args.speed_mean,
        turn_rate_std=args.turn_rate_std,
        step_amp=args.step_amp,
    )


def walk_params(args: Args) -> tuple[WalkParams, float | None]:
    """Walk parameters from the [walk] section of --config, then flags on top."""
    section = Section(name="walk")
    if args.common.config is not None:
        if not args.common.config.exists():
            raise UsageError(f"Config file not found: {args.common.config}")
        section = parse_config(args.common.config.read_text(encoding="utf-8")).sections.get("walk", section)
    eval_duration = args.eval_duration
    if eval_duration is None and "eval_duration" in section.data:
        value = coerce_value("eval_duration", section.data["eval_duration"], float)
        assert isinstance(value, float)
        eval_duration = value
    section = Section(name="walk", data={k: v for k, v in section.data.items() if k != "eval_duration"})
    walk = WalkParams.from_section(
        section,
        seed=args.common.seed,
        duration=args.duration,
        rate_hz=args.rate,
        speed_mean=args.speed_mean,
        turn_rate_std=args.turn_rate_std,
        step_amp=args.step_amp,
    )
    return walk, eval_duration


def run(args: Args) -> Exception | None:
    try:
        unknown = [name for name in args.presets if name not in PRESETS]
        if unknown:
            raise UsageError(f"Unknown presets {unknown}, expected some of {sorted(PRESETS)}")
        walk, eval_duration = walk_params(args)
        config = {"walk": walk.to_json(), "eval_duration": eval_duration, "presets": args.presets}
        with command_run("synth-gen", args.common, walk.seed, config, inputs={"config": args.common.config}) as ctx:
            bundles = generate_presets(walk, args.presets, eval_duration)
            for name, (train, held_out) in bundles.items():
                export_bundle(train, ctx.path(name) / "train")
                export_bundle(held_out, ctx.path(name) / "eval")
                logger.info(f"{name}: {len(train.imu)} training and {len(held_out.imu)} held-out samples")
    except (MotionTransformerError, OSError) as e:
        return e
    return None


def _parse_args(argv: list[str] | None = None) -> Args:
    parser = argparse.ArgumentParser(description="Generate synthetic multi-domain IMU recordings with ground truth.")
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
