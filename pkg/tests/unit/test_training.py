"""
Unit test file.
"""

import tempfile
import unittest
from pathlib import Path

import numpy as np

from motion_transformer.config import TrainConfig
from motion_transformer.dataio import LabelledWindow, Window, stack_frames, stack_labels
from motion_transformer.losses import total_loss
from motion_transformer.models import ModelArch, ModelBundle
from motion_transformer.training import (
    AdaptTrainer,
    BatchPrefetcher,
    BenchmarkConfig,
    BenchmarkData,
    EvalReport,
    TrainHistory,
    evaluate,
    latent_domain_gap,
    median_bandwidth,
    mmd2,
    report_from_predictions,
    run_benchmark,
    run_sweep,
    sweep_table,
    train_adapt,
    train_supervised,
)
from motion_transformer.training.benchmark import BENCHMARK_CONFIG
from motion_transformer.types import DomainTag, EvalMode, PolarVector, UsageError

SRC = DomainTag("src")
TGT = DomainTag("tgt")


def _config(**overrides: object) -> TrainConfig:
    base = TrainConfig(
        source="src",
        target="tgt",
        window=8,
        d_z=4,
        hidden=2,
        stride=8,
        lambda1=0.01,
        lambda2=100.0,
        lambda3=0.1,
        lambda4=1.0,
        lr=0.01,
        batch_size=4,
        steps=5,
        disc_steps_per_gen_step=1,
        seed=3,
        log_every=0,
    )
    return base.with_overrides(**overrides)


def _labelled(count: int, domain: DomainTag, seed: int, label: tuple[float, float] | None = None) -> list[LabelledWindow]:
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        frames = rng.normal(size=(8, 6))
        dl, dpsi = label if label is not None else (float(rng.uniform(0.5, 3.0)), float(rng.uniform(-0.5, 0.5)))
        window = Window(frames=frames, domain=domain, t_start=0.08 * k)
        out.append(LabelledWindow(window=window, label=PolarVector(dl, dpsi)))
    return out


def _unlabelled(count: int, domain: DomainTag, seed: int) -> list[Window]:
    return [w.window for w in _labelled(count, domain, seed)]


def _same_params(a: ModelBundle, b: ModelBundle) -> bool:
    arrays_a, arrays_b = a.arrays(), b.arrays()
    return all(np.array_equal(arrays_a[g][k], arrays_b[g][k]) for g in arrays_a for k in arrays_a[g])


class TrainAdaptTests(unittest.TestCase):
    """Joint adversarial training."""

    def test_zero_steps_is_init(self) -> None:
        config = _config(steps=0)
        bundle, history = train_adapt(_labelled(12, SRC, 0), _unlabelled(12, TGT, 1), config)
        self.assertEqual(len(history), 0)
        self.assertTrue(_same_params(bundle, ModelBundle(ModelArch(8, 4, 2, "src", "tgt"), seed=config.seed)))

    def test_deterministic(self) -> None:
        source, target = _labelled(12, SRC, 0), _unlabelled(12, TGT, 1)
        a, hist_a = train_adapt(source, target, _config())
        b, hist_b = train_adapt(source, target, _config())
        self.assertTrue(_same_params(a, b))
        self.assertEqual([r.total for _, r in hist_a.rows], [r.total for _, r in hist_b.rows])

    def test_history_rows_compose(self) -> None:
        config = _config()
        _, history = train_adapt(_labelled(12, SRC, 0), _unlabelled(12, TGT, 1), config)
        self.assertEqual([step for step, _ in history.rows], [1, 2, 3, 4, 5])
        self.assertEqual(len(history.disc), 5)
        for _, report in history.rows:
            self.assertAlmostEqual(report.total, total_loss(report, config.weights), delta=1e-9)

    def test_rejects_labelled_target(self) -> None:
        with self.assertRaises(UsageError):
            train_adapt(_labelled(12, SRC, 0), _labelled(12, TGT, 1), _config())  # type: ignore[arg-type]

    def test_rejects_empty_or_wrong_domain(self) -> None:
        with self.assertRaises(UsageError):
            train_adapt([], _unlabelled(12, TGT, 1), _config())
        with self.assertRaises(UsageError):
            train_adapt(_labelled(12, SRC, 0), _unlabelled(12, SRC, 1), _config())

    def test_supervised_path_equivalence(self) -> None:
        source, target = _labelled(12, SRC, 0), _unlabelled(12, TGT, 1)
        config = _config(steps=10, lambda1=0.0, lambda3=0.0, lambda4=0.0, adversarial=False)
        adapted, _ = train_adapt(source, target, config)
        supervised, _ = train_supervised(source, config)
        for group in ("encoder", "predictor"):
            for key, tensor in adapted.groups()[group].items():
                self.assertTrue(np.array_equal(tensor.values, supervised.groups()[group][key].values), f"{group}/{key}")


class FreezeTests(unittest.TestCase):
    """Each half-step only moves its own parameters."""

    def setUp(self) -> None:
        config = _config()
        self.bundle = ModelBundle(ModelArch(8, 4, 2, "src", "tgt"), seed=1)
        source = _labelled(6, SRC, 0)
        self.x_s = stack_frames(source)
        self.y_s = stack_labels(source)
        self.x_t = stack_frames(_unlabelled(6, TGT, 1))
        self.trainer = AdaptTrainer(self.bundle, config, self.x_s, self.y_s, self.x_t)

    def _snapshot(self, groups) -> list[np.ndarray]:
        return [t.values.copy() for g in groups for t in g.tensors()]

    def test_disc_step_freezes_generator_side(self) -> None:
        before = self._snapshot(self.bundle.generator_side())
        disc_before = self._snapshot(self.bundle.discriminator_side())
        self.trainer.disc_step(self.x_s, self.x_t)
        after = self._snapshot(self.bundle.generator_side())
        self.assertTrue(all(np.array_equal(a, b) for a, b in zip(before, after)))
        self.assertFalse(all(np.array_equal(a, b) for a, b in zip(disc_before, self._snapshot(self.bundle.discriminator_side()))))

    def test_gen_step_freezes_discriminators(self) -> None:
        before = self._snapshot(self.bundle.discriminator_side())
        self.trainer.gen_step(self.x_s, self.y_s, self.x_t)
        after = self._snapshot(self.bundle.discriminator_side())
        self.assertTrue(all(np.array_equal(a, b) for a, b in zip(before, after)))

    def test_needs_target_frames(self) -> None:
        with self.assertRaises(UsageError):
            AdaptTrainer(self.bundle, _config(), self.x_s, self.y_s, None)

    def test_shared_translation_matches_fresh_one(self) -> None:
        other = ModelBundle(ModelArch(8, 4, 2, "src", "tgt"), seed=1)
        fresh = AdaptTrainer(other, _config(), self.x_s, self.y_s, self.x_t)
        cache = self.trainer.translation(self.x_s, self.x_t)
        shared_disc = self.trainer.disc_step(self.x_s, self.x_t, cache=cache)
        shared_report = self.trainer.gen_step(self.x_s, self.y_s, self.x_t, cache=cache)
        self.assertEqual(shared_disc, fresh.disc_step(self.x_s, self.x_t))
        self.assertEqual(shared_report, fresh.gen_step(self.x_s, self.y_s, self.x_t))
        self.assertTrue(_same_params(self.bundle, other))


class SupervisedTests(unittest.TestCase):
    """Source-only and target-only baselines."""

    def test_zero_steps_is_init(self) -> None:
        config = _config(steps=0)
        bundle, _ = train_supervised(_labelled(12, TGT, 0), config)
        self.assertTrue(_same_params(bundle, ModelBundle(ModelArch(8, 4, 2, "src", "tgt"), seed=config.seed)))

    def test_constant_labels_converge(self) -> None:
        config = _config(steps=600, batch_size=16, val_fraction=0.0)
        _, history = train_supervised(_labelled(16, SRC, 5, label=(1.0, 0.2)), config)
        self.assertLess(history.rows[-1][1].pred, 1e-3)

    def test_deterministic(self) -> None:
        data = _labelled(12, SRC, 0)
        a, _ = train_supervised(data, _config())
        b, _ = train_supervised(data, _config())
        self.assertTrue(_same_params(a, b))

    def test_only_predictor_path_moves(self) -> None:
        config = _config()
        bundle, history = train_supervised(_labelled(12, SRC, 0), config)
        init = ModelBundle(ModelArch(8, 4, 2, "src", "tgt"), seed=config.seed)
        for name in ("decoder", "generator.src", "discriminator.tgt"):
            for key, tensor in bundle.groups()[name].items():
                self.assertTrue(np.array_equal(tensor.values, init.groups()[name][key].values))
        self.assertTrue(all(r.gan == 0.0 and r.cycle == 0.0 for _, r in history.rows))

    def test_validation_history(self) -> None:
        config = _config(steps=4, log_every=2, val_fraction=0.25)
        _, history = train_supervised(_labelled(12, SRC, 0), config)
        self.assertEqual([step for step, _ in history.val_pred], [0, 2, 4])


class HistoryTests(unittest.TestCase):
    """Loss history files."""

    def test_csv_round_trip(self) -> None:
        _, history = train_adapt(_labelled(12, SRC, 0), _unlabelled(12, TGT, 1), _config(steps=3))
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "history.csv"
            history.write_csv(path)
            lines = path.read_text(encoding="utf-8").splitlines()
            self.assertEqual(lines[0], "step,gan,ae,pred,cycle,percep,total")
            self.assertEqual(len(lines), 4)
            back = TrainHistory.read_csv(path)
        self.assertEqual([r for _, r in back.rows], [r for _, r in history.rows])


class PrefetchTests(unittest.TestCase):
    """Seeded batch producer."""

    def test_source_stream_independent_of_target(self) -> None:
        rng = np.random.default_rng(0)
        frames, labels, target = rng.normal(size=(10, 8, 6)), rng.normal(size=(10, 2)), rng.normal(size=(7, 8, 6))
        with BatchPrefetcher(frames, labels, target, 4, 6, seed=2) as with_target:
            a = list(with_target.get_results())
        with BatchPrefetcher(frames, labels, None, 4, 6, seed=2) as without_target:
            b = list(without_target.get_results())
        self.assertEqual([x.step for x in a], list(range(1, 7)))
        for x, y in zip(a, b):
            self.assertTrue(np.array_equal(x.x_s, y.x_s))
            self.assertIsNone(y.x_t)
            self.assertEqual(x.x_t.shape, (4, 8, 6))

    def test_empty_source(self) -> None:
        with self.assertRaises(UsageError):
            BatchPrefetcher(np.zeros((0, 8, 6)), np.zeros((0, 2)), None, 4, 1, seed=0)


class EvaluateTests(unittest.TestCase):
    """Polar prediction scoring."""

    def test_perfect_predictions(self) -> None:
        labels = np.array([[1.0, 0.1], [2.0, -3.0]])
        report = report_from_predictions(labels.copy(), labels)
        self.assertEqual((report.dl_rmse, report.dpsi_rmse, report.dl_mae, report.dpsi_mae), (0.0, 0.0, 0.0, 0.0))
        self.assertEqual(report.n_windows, 2)

    def test_constant_zero_prediction(self) -> None:
        labels = np.array([[1.0, 0.0]] * 5)
        report = report_from_predictions(np.zeros((5, 2)), labels)
        self.assertAlmostEqual(report.dl_rmse, 1.0, delta=1e-15)
        self.assertEqual(report.dpsi_rmse, 0.0)

    def test_heading_error_wraps(self) -> None:
        report = report_from_predictions(np.array([[1.0, 3.1]]), np.array([[1.0, -3.1]]))
        self.assertAlmostEqual(report.dpsi_rmse, 2 * np.pi - 6.2, delta=1e-12)

    def test_evaluate_bundle(self) -> None:
        data = _labelled(10, TGT, 0)
        bundle, _ = train_supervised(_labelled(12, SRC, 1), _config(steps=2))
        report = evaluate(bundle, data)
        self.assertEqual(report.n_windows, 10)
        self.assertGreater(report.dl_rmse, 0.0)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "eval_report.csv"
            report.write(path, EvalMode.SOURCE_ONLY.value)
            self.assertEqual(EvalReport.read(path), report)

    def test_window_length_mismatch(self) -> None:
        bundle, _ = train_supervised(_labelled(12, SRC, 1), _config(steps=0))
        long_window = LabelledWindow(Window(frames=np.zeros((12, 6)), domain=TGT, t_start=0.0), PolarVector(1.0, 0.0))
        with self.assertRaises(UsageError):
            evaluate(bundle, [long_window])


class MmdTests(unittest.TestCase):
    """Latent domain gap."""

    def test_identical_samples(self) -> None:
        x = np.random.default_rng(0).normal(size=(40, 4))
        self.assertLess(mmd2(x, x.copy()), 1e-9)

    def test_disjoint_constant_codes(self) -> None:
        self.assertGreater(mmd2(np.zeros((10, 4)), np.ones((10, 4))), 0.0)

    def test_shifted_gaussians(self) -> None:
        rng = np.random.default_rng(1)
        near = mmd2(rng.normal(size=(100, 3)), rng.normal(size=(100, 3)))
        far = mmd2(rng.normal(size=(100, 3)), rng.normal(loc=2.0, size=(100, 3)))
        self.assertLess(near, far)

    def test_median_bandwidth(self) -> None:
        x = np.array([[0.0], [1.0]])
        y = np.array([[3.0]])
        # pairwise distances 1, 3, 2
        self.assertEqual(median_bandwidth(x, y), 2.0)

    def test_dimension_mismatch(self) -> None:
        with self.assertRaises(UsageError):
            mmd2(np.zeros((3, 2)), np.zeros((3, 4)))

    def test_identical_window_sets(self) -> None:
        bundle, _ = train_supervised(_labelled(12, SRC, 1), _config(steps=0))
        windows = _unlabelled(20, SRC, 2)
        self.assertLess(latent_domain_gap(bundle, windows, list(windows)), 1e-9)


class BenchmarkTests(unittest.TestCase):
    """Three-way comparison plumbing at tiny scale."""

    def test_packaged_config(self) -> None:
        bench = BenchmarkConfig.from_file(BENCHMARK_CONFIG, duration=600.0, seed=4)
        self.assertEqual(bench.train.source, "synthetic-handheld")
        self.assertEqual(bench.train.target, "synthetic-pocket")
        self.assertEqual(bench.walk.duration, 600.0)
        self.assertEqual(bench.walk.seed, 4)
        self.assertEqual(bench.eval_duration, 1000.0)

    def test_missing_config(self) -> None:
        with self.assertRaises(UsageError):
            BenchmarkConfig.from_file(Path("/nonexistent/benchmark.conf"))

    def test_tiny_run(self) -> None:
        data = BenchmarkData(source=_labelled(12, SRC, 0), target_labelled=_labelled(12, TGT, 1), target_eval=_labelled(8, TGT, 2))
        result = run_benchmark(_config(steps=2), walk=None, data=data, gap_samples=8)  # type: ignore[arg-type]
        self.assertEqual(set(result.reports), set(EvalMode))
        self.assertEqual(list(result.table()["mode"]), ["source-only", "target-only", "adapted"])
        self.assertEqual(len(result.acceptance()), 4)
        self.assertGreaterEqual(result.gap_init, 0.0)
        with tempfile.TemporaryDirectory() as tmp:
            result.write(Path(tmp))
            for name in ("comparison.csv", "latent_gap.csv", "acceptance.csv"):
                self.assertTrue((Path(tmp) / name).exists(), name)

    def test_worker_process_matches_in_process_training(self) -> None:
        data = BenchmarkData(source=_labelled(12, SRC, 0), target_labelled=_labelled(12, TGT, 1), target_eval=_labelled(8, TGT, 2))
        config = _config(steps=2)
        result = run_benchmark(config, walk=None, data=data, gap_samples=8)  # type: ignore[arg-type]
        direct, history = train_adapt(data.source, data.target, config)
        self.assertTrue(_same_params(result.bundles[EvalMode.ADAPTED], direct))
        self.assertEqual(result.histories[EvalMode.ADAPTED].rows, history.rows)

    def test_tiny_sweep(self) -> None:
        other = DomainTag("other")
        source = _labelled(12, SRC, 0)
        data = {
            "tgt": BenchmarkData(source=source, target_labelled=_labelled(12, TGT, 1), target_eval=_labelled(8, TGT, 2)),
            "other": BenchmarkData(source=source, target_labelled=_labelled(12, other, 3), target_eval=_labelled(8, other, 4)),
        }
        results = run_sweep(_config(steps=2), walk=None, targets=["tgt", "other"], data=data, gap_samples=8)  # type: ignore[arg-type]
        self.assertEqual(list(results), ["tgt", "other"])
        self.assertIs(results["tgt"].bundles[EvalMode.SOURCE_ONLY], results["other"].bundles[EvalMode.SOURCE_ONLY])
        self.assertEqual(results["other"].bundles[EvalMode.ADAPTED].arch.target, "other")
        table = sweep_table(results)
        self.assertEqual(list(table.columns[:2]), ["target", "mode"])
        self.assertEqual(len(table), 6)
        self.assertEqual(list(table["target"]), ["tgt"] * 3 + ["other"] * 3)

    def test_sweep_rejects_bad_targets(self) -> None:
        for targets in (["src"], ["tgt", "tgt"], []):
            with self.assertRaises(UsageError, msg=str(targets)):
                run_sweep(_config(), walk=None, targets=targets, data={})  # type: ignore[arg-type]

    def test_sweep_targets_from_config(self) -> None:
        text = BENCHMARK_CONFIG.read_text(encoding="utf-8")
        self.assertEqual(BenchmarkConfig.from_text(text).sweep_targets, ("synthetic-pocket",))
        swept = BenchmarkConfig.from_text(text + "\n[benchmark]\ntargets = synthetic-pocket, synthetic-handbag\n")
        self.assertEqual(swept.sweep_targets, ("synthetic-pocket", "synthetic-handbag"))
        with self.assertRaises(UsageError):
            BenchmarkConfig.from_text(text + "\n[benchmark]\nsource = synthetic-trolley\n")


if __name__ == "__main__":
    unittest.main()
