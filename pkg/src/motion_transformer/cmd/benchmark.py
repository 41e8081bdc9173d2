import argparse
import logging
import sys
from dataclasses import dataclass

from motion_transformer.cmd.common import CommonArgs, add_common_arguments, command_run, common_from_namespace, exit_code
from motion_transformer.models import save_bundle
from motion_transformer.synth import preset
from motion_transformer.training import BenchmarkConfig, run_sweep, sweep_table
from motion_transformer.training.benchmark import BENCHMARK_CONFIG
from motion_transformer.types import MotionTransformerError

logger = logging.getLogger(__name__)


@dataclass
class Args:
    common: CommonArgs
    steps: int | None
    duration: float | None
    targets: list[str] | None


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--steps", help="Override the configured number of training steps", type=int, default=None)
    parser.add_argument("--duration", help="Override the walk duration in seconds", type=float, default=None)
    parser.add_argument("--targets", help="Target presets to sweep against one source-only model", nargs="+", default=None)


def args_from_namespace(args: argparse.Namespace) -> Args:
    return Args(common=common_from_namespace(args), steps=args.steps, duration=args.duration, targets=args.targets)


def load_benchmark_config(args: Args) -> BenchmarkConfig:
    """--seed drives both the walks and the training run."""
    loaded = BenchmarkConfig.from_file(args.common.config, duration=args.duration, seed=args.common.seed)
    train = loaded.train.with_overrides(seed=args.common.seed, steps=args.steps)
    targets = tuple(args.targets) if args.targets else loaded.targets
    for name in (train.source, *targets):
        preset(name)
    return BenchmarkConfig(train=train, walk=loaded.walk, eval_duration=loaded.eval_duration, targets=targets)


def run(args: Args) -> Exception | None:
    try:
        bench = load_benchmark_config(args)
        targets = bench.sweep_targets
        config = {"train": bench.train.to_dict(), "walk": bench.walk.to_json(), "eval_duration": bench.eval_duration, "targets": list(targets)}
        inputs = {"config": args.common.config or BENCHMARK_CONFIG}
        with command_run("benchmark", args.common, bench.train.seed, config, inputs) as ctx:
            results = run_sweep(bench.train, bench.walk, targets, bench.eval_duration)
            # one target writes at the top level, a sweep one directory per target
            nested = len(targets) > 1
            for target, result in results.items():
                directory = ctx.path(target) if nested else ctx.out
                result.write(directory)
                for mode, bundle in result.bundles.items():
                    extra = {"step": bench.train.steps, "experiment_id": ctx.experiment_id, "target": target}
                    save_bundle(directory / f"{mode.value}.ckpt", bundle, mode, extra=extra)
                    result.histories[mode].write_csv(directory / f"{mode.value}_history.csv")
                    ctx.record_eval(f"{target}:{mode.value}" if nested else mode.value, result.reports[mode])
                print(f"{bench.train.source} -> {target}")
                print(result.table().to_string(index=False))
                for check, passed in result.acceptance().items():
                    logger.info(f"{target} {check}: {'pass' if passed else 'FAIL'}")
            if nested:
                sweep_table(results).to_csv(ctx.path("sweep.csv"), index=False, float_format="%.17g", lineterminator="\n")
    except (MotionTransformerError, OSError) as e:
        return e
    return None


def _parse_args(argv: list[str] | None = None) -> Args:
    parser = argparse.ArgumentParser(description="Source-only vs target-only vs adapted on synthetic domains.")
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
