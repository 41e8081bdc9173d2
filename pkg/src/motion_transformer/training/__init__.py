from .benchmark import BenchmarkConfig, BenchmarkData, BenchmarkResult, benchmark_data, run_benchmark, run_sweep, sweep_table
from .evaluate import EvalReport, evaluate, latent_codes, latent_domain_gap, predict_windows, predictions_frame, report_from_predictions
from .mmd import median_bandwidth, mmd2
from .prefetch import Batch, BatchPrefetcher
from .trainer import AdaptTrainer, TrainHistory, prepare_labelled, train_adapt, train_supervised

__all__ = [
    "AdaptTrainer",
    "Batch",
    "BatchPrefetcher",
    "BenchmarkConfig",
    "BenchmarkData",
    "BenchmarkResult",
    "EvalReport",
    "TrainHistory",
    "benchmark_data",
    "evaluate",
    "latent_codes",
    "latent_domain_gap",
    "median_bandwidth",
    "mmd2",
    "predict_windows",
    "predictions_frame",
    "prepare_labelled",
    "report_from_predictions",
    "run_benchmark",
    "run_sweep",
    "sweep_table",
    "train_adapt",
    "train_supervised",
]
