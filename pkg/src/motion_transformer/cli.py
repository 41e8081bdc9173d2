"""
motion-transformer: one entry point, one subcommand per task.

    motion-transformer synth-gen --duration 600 --out data
    motion-transformer train --config run.conf --source data/synthetic-handheld/train --target data/synthetic-pocket/train
    motion-transformer eval --checkpoint out/model.ckpt --data data/synthetic-pocket/eval
    motion-transformer track --checkpoint out/model.ckpt --imu data/synthetic-pocket/eval/imu.csv --poses data/synthetic-pocket/eval/poses.csv
    motion-transformer benchmark

Exit codes: 0 success, 2 usage error, 3 data error, 4 non-finite loss.
"""

import argparse
import sys
from typing import Callable

from motion_transformer.cmd import benchmark, eval as eval_cmd, synth_gen, track, train
from motion_transformer.cmd.common import add_common_arguments, exit_code
from motion_transformer.log import setup_default_logging

Runner = Callable[[argparse.Namespace], Exception | None]


def _runner(module) -> Runner:
    def run(ns: argparse.Namespace) -> Exception | None:
        return module.run(module.args_from_namespace(ns))

    return run


COMMANDS = {
    "synth-gen": (synth_gen, "Generate synthetic multi-domain recordings"),
    "train": (train, "Train an adapted model or a supervised baseline"),
    "eval": (eval_cmd, "Score a checkpoint on a labelled recording"),
    "track": (track, "Dead-reckon a trajectory from an IMU recording"),
    "benchmark": (benchmark, "Source-only vs target-only vs adapted on synthetic domains"),
}


def build_parser() -> argparse.ArgumentParser:
    # global flags follow the subcommand name
    common = argparse.ArgumentParser(add_help=False)
    add_common_arguments(common)
    parser = argparse.ArgumentParser(prog="motion-transformer", description="Inertial odometry with unsupervised domain adaptation.")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, (module, help_text) in COMMANDS.items():
        sub = subparsers.add_parser(name, help=help_text, parents=[common])
        module.add_arguments(sub)
        sub.set_defaults(runner=_runner(module))
    return parser


def main(argv: list[str] | None = None) -> int:
    """Main entry point."""
    setup_default_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    err = args.runner(args)
    if err is not None:
        print(f"Error: {err}", file=sys.stderr)
    return exit_code(err)


if __name__ == "__main__":
    sys.exit(main())
