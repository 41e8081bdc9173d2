import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import pandas as pd

from motion_transformer.config import LossWeights, TrainConfig
from motion_transformer.dataio import LabelledWindow, NormStats, Window, fit_norm_stats, split_dataset, stack_frames, stack_labels
from motion_transformer.losses import (
    HISTORY_HEADER,
    LOSS_COLUMNS,
    LossReport,
    Translation,
    ae_loss,
    cycle_loss,
    discriminator_loss,
    generator_gan_loss,
    percep_loss,
    polar_error,
    pred_loss,
)
from motion_transformer.models import ModelArch, ModelBundle, encode, predict_polar
from motion_transformer.nn import Adam, Tensor, backward, no_grad
from motion_transformer.training.prefetch import BatchPrefetcher
from motion_transformer.types import DataError, NumericError, UsageError

logger = logging.getLogger(__name__)

CheckpointFn = Callable[[int, ModelBundle], None]


@dataclass
class TrainHistory:
    rows: list[tuple[int, LossReport]] = field(default_factory=list)
    disc: list[tuple[int, float]] = field(default_factory=list)
    val_pred: list[tuple[int, float]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def append(self, step: int, report: LossReport) -> None:
        self.rows.append((step, report))

    def to_frame(self) -> pd.DataFrame:
        records = [{"step": step, **report.to_json()} for step, report in self.rows]
        return pd.DataFrame(records, columns=["step", *LOSS_COLUMNS])

    def write_csv(self, path: Path) -> None:
        lines = [HISTORY_HEADER] + [report.csv_row(step) for step, report in self.rows]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    def write_val_csv(self, path: Path) -> None:
        frame = pd.DataFrame(self.val_pred, columns=["step", "val_pred"])
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")

    @staticmethod
    def read_csv(path: Path) -> "TrainHistory":
        try:
            frame = pd.read_csv(path, float_precision="round_trip")
        except (OSError, pd.errors.EmptyDataError) as e:
            raise DataError(f"Cannot read loss history {path}: {e}") from e
        history = TrainHistory()
        for record in frame.to_dict("records"):
            history.append(int(record["step"]), LossReport(**{c: float(record[c]) for c in LOSS_COLUMNS}))
        return history


def _check_finite(value: float, what: str, step: int) -> None:
    if not math.isfinite(value):
        raise NumericError(f"{what} became non-finite at step {step}")


class AdaptTrainer:
    """Alternating discriminator and generator updates over one bundle.

    With supervised=True only the encoder and predictor are optimised, on
    lambda2 * L_pred, and no target data is used.
    """

    def __init__(
        self,
        bundle: ModelBundle,
        config: TrainConfig,
        source_frames: np.ndarray,
        source_labels: np.ndarray,
        target_frames: np.ndarray | None,
        val_frames: np.ndarray | None = None,
        val_labels: np.ndarray | None = None,
        supervised: bool = False,
    ):
        if not supervised and target_frames is None:
            raise UsageError("Adversarial adaptation needs target windows")
        self.bundle = bundle
        self.config = config
        self.weights: LossWeights = config.weights
        self.supervised = supervised
        self.adversarial = config.adversarial and not supervised
        self.source_frames = source_frames
        self.source_labels = source_labels
        self.target_frames = None if supervised else target_frames
        self.val_frames = val_frames
        self.val_labels = val_labels
        groups = bundle.predictor_path() if supervised else bundle.generator_side()
        self.gen_opt = Adam(groups, config.lr, config.beta1, config.beta2, config.eps)
        self.disc_opt = Adam(bundle.discriminator_side(), config.lr, config.beta1, config.beta2, config.eps)

    def translation(self, x_s: np.ndarray, x_t: np.ndarray) -> Translation:
        return Translation(self.bundle, Tensor(x_s), Tensor(x_t))

    def disc_step(self, x_s: np.ndarray, x_t: np.ndarray, step: int = 0, cache: Translation | None = None) -> float:
        """One discriminator update; touches discriminator parameters only.

        A cache shared with the following gen_step is read, not rebuilt; its
        fakes enter the loss detached.
        """
        self.disc_opt.zero_grad()
        if cache is None:
            with no_grad():
                cache = self.translation(x_s, x_t)
                _ = (cache.fake_t, cache.fake_s)
        loss = discriminator_loss(self.bundle, cache.x_s, cache.x_t, cache=cache)
        _check_finite(loss.item(), "Discriminator loss", step)
        backward(loss)
        self.disc_opt.step()
        return loss.item()

    def gen_step(self, x_s: np.ndarray, y_s: np.ndarray, x_t: np.ndarray | None, step: int = 0, cache: Translation | None = None) -> LossReport:
        """One update of encoder, generators, decoder and predictor."""
        self.gen_opt.zero_grad()
        if self.supervised:
            pred = pred_loss(self.bundle, Tensor(x_s), y_s)
            objective = pred * self.weights.lambda2
            report = LossReport.compose(0.0, 0.0, pred.item(), 0.0, 0.0, self.weights)
        else:
            assert x_t is not None
            objective, report = self._adapt_objective(cache if cache is not None else self.translation(x_s, x_t), y_s)
        _check_finite(report.total, "Training loss", step)
        if objective is not None:
            backward(objective)
            self.gen_opt.step()
        return report

    def _adapt_objective(self, cache: Translation, y_s: np.ndarray) -> tuple[Tensor | None, LossReport]:
        w = self.weights
        terms: dict[str, Callable[[], Tensor]] = {
            "gan": lambda: generator_gan_loss(self.bundle, cache.x_s, cache.x_t, cache=cache),
            "ae": lambda: ae_loss(self.bundle, cache.x_s, z=cache.z_s) + ae_loss(self.bundle, cache.x_t, z=cache.z_t),
            "pred": lambda: polar_error(cache.pred_s, y_s),
            "cycle": lambda: cycle_loss(self.bundle, cache.x_s, cache.x_t, cache=cache),
            "percep": lambda: percep_loss(self.bundle, cache.x_s, cache.x_t, cache=cache),
        }
        scale = {"gan": 1.0 if self.adversarial else 0.0, "ae": w.lambda1, "pred": w.lambda2, "cycle": w.lambda3, "percep": w.lambda4}
        values: dict[str, float] = {}
        objective: Tensor | None = None
        # weighted terms first so the shared cache holds differentiable tensors
        for name in ("pred", "ae", "cycle", "percep", "gan"):
            if scale[name] > 0:
                term = terms[name]()
                values[name] = term.item()
                weighted = term * scale[name]
                objective = weighted if objective is None else objective + weighted
        with no_grad():
            for name in ("ae", "pred", "cycle", "percep"):
                if name not in values:
                    values[name] = terms[name]().item()
        values.setdefault("gan", 0.0)
        report = LossReport.compose(values["gan"], values["ae"], values["pred"], values["cycle"], values["percep"], w)
        return objective, report

    def validation_pred_loss(self) -> float | None:
        if self.val_frames is None or self.val_labels is None or len(self.val_frames) == 0:
            return None
        with no_grad():
            pred = predict_polar(self.bundle, encode(self.bundle, Tensor(self.val_frames)))
            return polar_error(pred, self.val_labels).item()

    def run(self, on_checkpoint: CheckpointFn | None = None) -> TrainHistory:
        config = self.config
        history = TrainHistory()
        val0 = self.validation_pred_loss()
        if val0 is not None:
            history.val_pred.append((0, val0))
            logger.info(f"step 0: source validation pred loss {val0:.6f}")
        with BatchPrefetcher(self.source_frames, self.source_labels, self.target_frames, config.batch_size, config.steps, config.seed) as prefetcher:
            for batch in prefetcher.get_results():
                step = batch.step
                # generator-side parameters do not move during disc steps
                cache = self.translation(batch.x_s, batch.x_t) if batch.x_t is not None and not self.supervised else None
                if self.adversarial and cache is not None:
                    for _ in range(config.disc_steps_per_gen_step):
                        history.disc.append((step, self.disc_step(batch.x_s, batch.x_t, step, cache=cache)))
                report = self.gen_step(batch.x_s, batch.y_s, batch.x_t, step, cache=cache)
                history.append(step, report)
                if config.log_every and step % config.log_every == 0:
                    val = self.validation_pred_loss()
                    if val is not None:
                        history.val_pred.append((step, val))
                    logger.info(f"step {step}: total {report.total:.6f} pred {report.pred:.6f} gan {report.gan:.6f} val_pred {val}")
                if on_checkpoint is not None and config.checkpoint_every and step % config.checkpoint_every == 0:
                    on_checkpoint(step, self.bundle)
        if config.steps and (not history.val_pred or history.val_pred[-1][0] != config.steps):
            val = self.validation_pred_loss()
            if val is not None:
                history.val_pred.append((config.steps, val))
        return history


@dataclass(frozen=True)
class PreparedSource:
    train: list[LabelledWindow]
    val: list[LabelledWindow]
    norm: NormStats


def _check_windows(windows: Sequence[Window | LabelledWindow], config: TrainConfig, what: str, domains: Sequence[str]) -> None:
    if len(windows) == 0:
        raise UsageError(f"No {what} windows to train on")
    for w in windows:
        window = w.window if isinstance(w, LabelledWindow) else w
        if window.n != config.window:
            raise UsageError(f"{what} window has {window.n} frames, config expects {config.window}")
        if window.domain.name not in domains:
            raise UsageError(f"{what} window from domain '{window.domain}', expected {' or '.join(domains)}")


def prepare_labelled(windows: Sequence[LabelledWindow], config: TrainConfig, norm: NormStats | None = None) -> PreparedSource:
    """Hold out a validation share and fit normalisation on the remaining training windows."""
    if any(not isinstance(w, LabelledWindow) for w in windows):
        raise UsageError("Supervised windows must carry labels")
    if config.val_fraction > 0 and len(windows) >= 4:
        train, val, _ = split_dataset(windows, (1.0 - config.val_fraction, config.val_fraction, 0.0), config.seed)
    else:
        train, val = list(windows), []
    stats = norm if norm is not None else fit_norm_stats(train)
    return PreparedSource(train=train, val=val, norm=stats)


def _new_bundle(config: TrainConfig, norm: NormStats) -> ModelBundle:
    bundle = ModelBundle(ModelArch(config.window, config.d_z, config.hidden, config.source, config.target), seed=config.seed)
    bundle.norm = norm
    return bundle


def train_adapt(
    source: Sequence[LabelledWindow],
    target: Sequence[Window],
    config: TrainConfig,
    norm: NormStats | None = None,
    on_checkpoint: CheckpointFn | None = None,
) -> tuple[ModelBundle, TrainHistory]:
    """Joint adversarial training; target windows are never labelled."""
    _check_windows(source, config, "Source", [config.source])
    _check_windows(target, config, "Target", [config.target])
    if any(isinstance(w, LabelledWindow) for w in target):
        raise UsageError("Target training windows must be unlabelled")
    prepared = prepare_labelled(source, config, norm)
    bundle = _new_bundle(config, prepared.norm)
    trainer = AdaptTrainer(
        bundle,
        config,
        stack_frames(prepared.train, prepared.norm),
        stack_labels(prepared.train),
        stack_frames(target, prepared.norm),
        stack_frames(prepared.val, prepared.norm) if prepared.val else None,
        stack_labels(prepared.val) if prepared.val else None,
    )
    logger.info(f"Adapting {config.source} -> {config.target}: {len(prepared.train)} source, {len(target)} target windows, {config.steps} steps")
    history = trainer.run(on_checkpoint)
    return bundle, history


def train_supervised(
    labelled: Sequence[LabelledWindow],
    config: TrainConfig,
    norm: NormStats | None = None,
    on_checkpoint: CheckpointFn | None = None,
) -> tuple[ModelBundle, TrainHistory]:
    """Encoder and predictor trained on lambda2 * L_pred only (source-only / target-only baselines)."""
    _check_windows(labelled, config, "Labelled", [config.source, config.target])
    prepared = prepare_labelled(labelled, config, norm)
    bundle = _new_bundle(config, prepared.norm)
    trainer = AdaptTrainer(
        bundle,
        config,
        stack_frames(prepared.train, prepared.norm),
        stack_labels(prepared.train),
        None,
        stack_frames(prepared.val, prepared.norm) if prepared.val else None,
        stack_labels(prepared.val) if prepared.val else None,
        supervised=True,
    )
    logger.info(f"Supervised training on {len(prepared.train)} windows, {config.steps} steps")
    history = trainer.run(on_checkpoint)
    return bundle, history
