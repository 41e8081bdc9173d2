"""
Three-way transfer comparison on synthetic domains.

source-only:  encoder + predictor trained on labelled source windows
target-only:  encoder + predictor trained on labelled target windows
adapted:      joint adversarial training, target labels never seen

All three are scored on the held-out labelled target recording, and the
latent domain gap is measured before and after adaptation. A sweep repeats
this for several targets against one shared source-only model.
"""

import logging
from concurrent.futures import Future, ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from motion_transformer.config import Section, TrainConfig, coerce_value, parse_config
from motion_transformer.dataio import LabelledWindow, Window, make_labelled_windows
from motion_transformer.models import ModelArch, ModelBundle
from motion_transformer.synth import DomainBundles, WalkParams, make_domain_bundles, preset
from motion_transformer.training.evaluate import EvalReport, evaluate, latent_domain_gap
from motion_transformer.training.trainer import TrainHistory, train_adapt, train_supervised
from motion_transformer.types import EvalMode, UsageError
from motion_transformer.util import worker_count

logger = logging.getLogger(__name__)

BENCHMARK_CONFIG = Path(__file__).resolve().parent.parent / "assets" / "benchmark.conf"


def _split_names(value: str) -> tuple[str, ...]:
    return tuple(name.strip() for name in value.split(",") if name.strip())


@dataclass(frozen=True)
class BenchmarkConfig:
    """Training keys at the top level, walk keys under [walk], sweep targets under [benchmark]."""

    train: TrainConfig
    walk: WalkParams
    eval_duration: float | None = None
    targets: tuple[str, ...] = ()

    @property
    def sweep_targets(self) -> tuple[str, ...]:
        return self.targets or (self.train.target,)

    @staticmethod
    def from_text(content: str, **walk_overrides: object) -> "BenchmarkConfig":
        train = TrainConfig.from_text(content)
        parsed = parse_config(content)
        section = parsed.sections.get("walk", Section(name="walk"))
        eval_duration = None
        if "eval_duration" in section.data:
            eval_duration = coerce_value("eval_duration", section.data.pop("eval_duration"), float)
            assert isinstance(eval_duration, float)
        bench = parsed.sections.get("benchmark", Section(name="benchmark"))
        unknown = sorted(set(bench.data) - {"targets"})
        if unknown:
            raise UsageError(f"Unknown benchmark key(s): {', '.join(unknown)}")
        targets = _split_names(bench.get("targets") or "")
        return BenchmarkConfig(train=train, walk=WalkParams.from_section(section, **walk_overrides), eval_duration=eval_duration, targets=targets)

    @staticmethod
    def from_file(path: Path | None = None, **walk_overrides: object) -> "BenchmarkConfig":
        path = BENCHMARK_CONFIG if path is None else path
        if not path.exists():
            raise UsageError(f"Config file not found: {path}")
        return BenchmarkConfig.from_text(path.read_text(encoding="utf-8"), **walk_overrides)


@dataclass
class BenchmarkResult:
    reports: dict[EvalMode, EvalReport]
    gap_init: float
    gap_adapted: float
    bundles: dict[EvalMode, ModelBundle] = field(repr=False)
    histories: dict[EvalMode, TrainHistory] = field(repr=False)

    def table(self) -> pd.DataFrame:
        rows = [{"mode": mode.value, **self.reports[mode].to_json()} for mode in EvalMode if mode in self.reports]
        return pd.DataFrame(rows)

    def acceptance(self) -> dict[str, bool]:
        src = self.reports[EvalMode.SOURCE_ONLY]
        tgt = self.reports[EvalMode.TARGET_ONLY]
        ada = self.reports[EvalMode.ADAPTED]
        return {
            "source_only_dpsi_at_least_2x_adapted": src.dpsi_rmse >= 2.0 * ada.dpsi_rmse,
            "adapted_dpsi_within_1.5x_target_only": ada.dpsi_rmse <= 1.5 * tgt.dpsi_rmse,
            "adapted_dl_within_2x_target_only": ada.dl_rmse <= 2.0 * tgt.dl_rmse,
            "latent_gap_halved": self.gap_adapted < 0.5 * self.gap_init,
        }

    def write(self, directory: Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.table().to_csv(directory / "comparison.csv", index=False, float_format="%.17g", lineterminator="\n")
        gap = pd.DataFrame([{"gap_init": self.gap_init, "gap_adapted": self.gap_adapted}])
        gap.to_csv(directory / "latent_gap.csv", index=False, float_format="%.17g", lineterminator="\n")
        checks = pd.DataFrame([{"check": k, "passed": v} for k, v in self.acceptance().items()])
        checks.to_csv(directory / "acceptance.csv", index=False, lineterminator="\n")


def sweep_table(results: Mapping[str, BenchmarkResult]) -> pd.DataFrame:
    """One row per (target, mode) plus the latent gaps of that target."""
    frames = []
    for target, result in results.items():
        frame = result.table()
        frame.insert(0, "target", target)
        frame["gap_init"] = result.gap_init
        frame["gap_adapted"] = result.gap_adapted
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


@dataclass(frozen=True)
class BenchmarkData:
    source: list[LabelledWindow]
    target_labelled: list[LabelledWindow]
    target_eval: list[LabelledWindow]

    @property
    def target(self) -> list[Window]:
        return [w.window for w in self.target_labelled]


def benchmark_data(bundles: DomainBundles, config: TrainConfig) -> BenchmarkData:
    n, stride = config.window, config.stride
    return BenchmarkData(
        source=make_labelled_windows(bundles.source.imu, bundles.source.poses, n, stride, bundles.source.domain),
        target_labelled=make_labelled_windows(bundles.target.imu, bundles.target.poses, n, stride, bundles.target.domain),
        target_eval=make_labelled_windows(bundles.target_eval.imu, bundles.target_eval.poses, n, stride, bundles.target_eval.domain),
    )


def _subsample(windows: Sequence[Window], count: int, seed: int) -> list[Window]:
    if len(windows) <= count:
        return list(windows)
    idx = np.sort(np.random.default_rng(seed).choice(len(windows), size=count, replace=False))
    return [windows[i] for i in idx]


def _train_job(mode: EvalMode, config: TrainConfig, labelled: list[LabelledWindow], target: list[Window] | None) -> tuple[ModelBundle, TrainHistory]:
    """Runs in a worker process; everything in and out is pickled."""
    if mode is EvalMode.ADAPTED:
        assert target is not None
        bundle, history = train_adapt(labelled, target, config)
    else:
        bundle, history = train_supervised(labelled, config)
    for params in bundle.groups().values():
        params.zero_grad()
    return bundle, history


def _sweep_configs(config: TrainConfig, targets: Sequence[str]) -> dict[str, TrainConfig]:
    if not targets:
        raise UsageError("A benchmark needs at least one target domain")
    if len(set(targets)) != len(targets):
        raise UsageError(f"Duplicate benchmark targets: {list(targets)}")
    if config.source in targets:
        raise UsageError(f"Source domain '{config.source}' cannot also be a target")
    return {name: config.with_overrides(target=name) for name in targets}


def run_sweep(
    config: TrainConfig,
    walk: WalkParams,
    targets: Sequence[str] | None = None,
    eval_duration: float | None = None,
    gap_samples: int = 500,
    data: Mapping[str, BenchmarkData] | None = None,
) -> dict[str, BenchmarkResult]:
    """Source-only once, then target-only and adapted per target, all in worker processes.

    The source walk is seeded by walk.seed alone, so every target shares the
    same source windows and one source-only model is scored on each of them.
    """
    targets = tuple(targets) if targets else (config.target,)
    configs = _sweep_configs(config, targets)
    if data is None:
        data = {
            name: benchmark_data(make_domain_bundles(walk, preset(config.source), preset(name), eval_duration=eval_duration), configs[name])
            for name in targets
        }
    missing = [name for name in targets if name not in data]
    if missing:
        raise UsageError(f"No benchmark data for target(s): {', '.join(missing)}")
    first = targets[0]
    for name in targets:
        d = data[name]
        logger.info(f"Benchmark {config.source} -> {name}: {len(d.source)} source, {len(d.target_labelled)} target, {len(d.target_eval)} eval windows")

    jobs: dict[tuple[str, EvalMode], tuple[EvalMode, TrainConfig, list[LabelledWindow], list[Window] | None]] = {
        (first, EvalMode.SOURCE_ONLY): (EvalMode.SOURCE_ONLY, configs[first], data[first].source, None),
    }
    for name in targets:
        jobs[(name, EvalMode.TARGET_ONLY)] = (EvalMode.TARGET_ONLY, configs[name], data[name].target_labelled, None)
        jobs[(name, EvalMode.ADAPTED)] = (EvalMode.ADAPTED, configs[name], data[name].source, data[name].target)
    with ProcessPoolExecutor(max_workers=worker_count(len(jobs))) as executor:
        futures: dict[tuple[str, EvalMode], Future] = {key: executor.submit(_train_job, *args) for key, args in jobs.items()}
        runs = {key: future.result() for key, future in futures.items()}

    source_only = runs[(first, EvalMode.SOURCE_ONLY)]
    results: dict[str, BenchmarkResult] = {}
    for name in targets:
        cfg, d = configs[name], data[name]
        by_mode = {
            EvalMode.SOURCE_ONLY: source_only,
            EvalMode.TARGET_ONLY: runs[(name, EvalMode.TARGET_ONLY)],
            EvalMode.ADAPTED: runs[(name, EvalMode.ADAPTED)],
        }
        bundles = {mode: run[0] for mode, run in by_mode.items()}
        reports = {mode: evaluate(bundle, d.target_eval) for mode, bundle in bundles.items()}

        adapted = bundles[EvalMode.ADAPTED]
        initial = ModelBundle(ModelArch(cfg.window, cfg.d_z, cfg.hidden, cfg.source, cfg.target), seed=cfg.seed)
        initial.norm = adapted.norm
        gap_source = _subsample([w.window for w in d.source], gap_samples, cfg.seed)
        gap_target = _subsample(d.target, gap_samples, cfg.seed + 1)
        gap_init = latent_domain_gap(initial, gap_source, gap_target)
        gap_adapted = latent_domain_gap(adapted, gap_source, gap_target)
        logger.info(f"Latent domain gap {cfg.source} -> {name}: {gap_init:.6f} at init, {gap_adapted:.6f} after adaptation")

        results[name] = BenchmarkResult(
            reports=reports,
            gap_init=gap_init,
            gap_adapted=gap_adapted,
            bundles=bundles,
            histories={mode: run[1] for mode, run in by_mode.items()},
        )
    return results


def run_benchmark(
    config: TrainConfig,
    walk: WalkParams,
    eval_duration: float | None = None,
    gap_samples: int = 500,
    data: BenchmarkData | None = None,
) -> BenchmarkResult:
    sweep_data = None if data is None else {config.target: data}
    return run_sweep(config, walk, (config.target,), eval_duration, gap_samples, sweep_data)[config.target]
