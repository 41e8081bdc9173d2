"""
Flags and run bookkeeping shared by every subcommand.
"""

import argparse
import logging
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator

from motion_transformer.config import db_url_from_env, default_run_dir, log_level_from_env
from motion_transformer.db import DB
from motion_transformer.log import configure_logging
from motion_transformer.manifest import RunManifest
from motion_transformer.training.evaluate import EvalReport
from motion_transformer.types import DataError, NumericError, UsageError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


@dataclass
class CommonArgs:
    seed: int | None
    config: Path | None
    out: Path | None
    verbose: bool
    db_url: str | None


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", help="Seed overriding the config / defaults", type=int, default=None)
    parser.add_argument("--config", help="Path to a key = value config file", type=Path, default=None)
    parser.add_argument("--out", help="Output directory (default: per-user data dir / runs / <experiment id>)", type=Path, default=None)
    parser.add_argument("-v", "--verbose", help="Verbose output", action="store_true")
    parser.add_argument("--db-url", help="SQLAlchemy URL of the run ledger, e.g. sqlite:///runs.db", type=str, default=None)


def common_from_namespace(args: argparse.Namespace) -> CommonArgs:
    return CommonArgs(
        seed=args.seed,
        config=args.config,
        out=args.out,
        verbose=args.verbose,
        db_url=args.db_url,
    )


def exit_code(err: BaseException | None) -> int:
    if err is None:
        return EXIT_OK
    if isinstance(err, NumericError):
        return EXIT_NUMERIC
    if isinstance(err, UsageError):
        return EXIT_USAGE
    if isinstance(err, (DataError, FileNotFoundError)):
        return EXIT_DATA
    return EXIT_FAILURE


class RunContext:
    """Output directory, manifest and optional ledger of one command."""

    def __init__(self, out: Path, manifest: RunManifest, db: DB | None):
        self.out = out
        self.manifest = manifest
        self.db = db

    @property
    def experiment_id(self) -> str:
        return self.manifest.experiment_id

    def path(self, name: str) -> Path:
        return self.out / name

    def record_eval(self, mode: str, report: EvalReport) -> None:
        if self.db is not None:
            self.db.record_eval(self.experiment_id, mode, report)


@contextmanager
def command_run(command: str, common: CommonArgs, seed: int, config: dict[str, Any], inputs: dict[str, Path | None]) -> Iterator[RunContext]:
    """
    Writes manifest.json before the work starts and again, with output
    digests, once it finishes or fails.
    """
    manifest = RunManifest.create(command, seed, config, inputs)
    out = common.out if common.out is not None else default_run_dir(manifest.experiment_id)
    out.mkdir(parents=True, exist_ok=True)
    level = "DEBUG" if common.verbose else log_level_from_env()
    configure_logging(level, out / "run.log")
    manifest.write(out)
    logger.info(f"{command}: experiment {manifest.experiment_id}, output {out}")

    db_url = common.db_url or db_url_from_env()
    db = DB(db_url) if db_url else None
    try:
        if db is not None:
            db.record_run(manifest.experiment_id, command, seed, manifest.to_json())
        ctx = RunContext(out, manifest, db)
        try:
            yield ctx
        except Exception:
            manifest.finish(out, status="failed")
            if db is not None:
                db.record_run(manifest.experiment_id, command, seed, manifest.to_json(), status="failed")
            raise
        manifest.finish(out, status="ok")
        if db is not None:
            db.record_run(manifest.experiment_id, command, seed, manifest.to_json(), status="ok")
    finally:
        if db is not None:
            db.close()
