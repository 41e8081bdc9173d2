import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from motion_transformer.dataio import LabelledWindow, NormStats, Window, stack_frames, stack_labels
from motion_transformer.models import ModelBundle, encode, predict_polar
from motion_transformer.nn import Tensor, no_grad
from motion_transformer.training.mmd import mmd2
from motion_transformer.types import DataError, UsageError, wrap_angles

logger = logging.getLogger(__name__)

EVAL_BATCH = 256


@dataclass(frozen=True)
class EvalReport:
    dl_rmse: float
    dpsi_rmse: float
    dl_mae: float
    dpsi_mae: float
    n_windows: int

    def to_json(self) -> dict[str, float | int]:
        return asdict(self)

    def write(self, path: Path, mode: str = "") -> None:
        frame = pd.DataFrame([{"mode": mode, **self.to_json()}])
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")

    @staticmethod
    def read(path: Path) -> "EvalReport":
        try:
            row = pd.read_csv(path, float_precision="round_trip").iloc[0]
            return EvalReport(
                dl_rmse=float(row["dl_rmse"]),
                dpsi_rmse=float(row["dpsi_rmse"]),
                dl_mae=float(row["dl_mae"]),
                dpsi_mae=float(row["dpsi_mae"]),
                n_windows=int(row["n_windows"]),
            )
        except (OSError, KeyError, IndexError, ValueError) as e:
            raise DataError(f"Cannot read eval report {path}: {e}") from e


def _normalised(bundle: ModelBundle, windows: Sequence["Window | LabelledWindow"], norm: NormStats | None) -> np.ndarray:
    stats = norm if norm is not None else bundle.norm
    if stats is None:
        raise UsageError("No normalisation statistics available for this model")
    frames = stack_frames(windows, stats)
    if frames.shape[1] != bundle.arch.window:
        raise UsageError(f"Model window length is {bundle.arch.window} frames, data windows have {frames.shape[1]}")
    return frames


def latent_codes(bundle: ModelBundle, frames: np.ndarray) -> np.ndarray:
    """Time-averaged latent code per window, (N, d_z)."""
    out = []
    with no_grad():
        for start in range(0, len(frames), EVAL_BATCH):
            z = encode(bundle, Tensor(frames[start : start + EVAL_BATCH]))
            out.append(z.values.mean(axis=1))
    return np.concatenate(out, axis=0)


def predict_frames(bundle: ModelBundle, frames: np.ndarray) -> np.ndarray:
    """(N, 2) predictions with dpsi wrapped."""
    out = []
    with no_grad():
        for start in range(0, len(frames), EVAL_BATCH):
            z = encode(bundle, Tensor(frames[start : start + EVAL_BATCH]))
            out.append(predict_polar(bundle, z).values)
    pred = np.concatenate(out, axis=0)
    pred[:, 1] = wrap_angles(pred[:, 1])
    return pred


def predict_windows(bundle: ModelBundle, windows: Sequence["Window | LabelledWindow"], norm: NormStats | None = None) -> np.ndarray:
    if len(windows) == 0:
        raise UsageError("No windows to predict")
    return predict_frames(bundle, _normalised(bundle, windows, norm))


def report_from_predictions(pred: np.ndarray, labels: np.ndarray) -> EvalReport:
    if len(pred) == 0:
        raise UsageError("Cannot evaluate an empty window set")
    dl_err = pred[:, 0] - labels[:, 0]
    dpsi_err = wrap_angles(pred[:, 1] - labels[:, 1])
    return EvalReport(
        dl_rmse=float(np.sqrt(np.mean(dl_err**2))),
        dpsi_rmse=float(np.sqrt(np.mean(dpsi_err**2))),
        dl_mae=float(np.mean(np.abs(dl_err))),
        dpsi_mae=float(np.mean(np.abs(dpsi_err))),
        n_windows=len(pred),
    )


def evaluate(bundle: ModelBundle, windows: Sequence[LabelledWindow], norm: NormStats | None = None) -> EvalReport:
    if any(not isinstance(w, LabelledWindow) for w in windows):
        raise UsageError("Evaluation windows must carry labels")
    pred = predict_windows(bundle, windows, norm)
    report = report_from_predictions(pred, stack_labels(windows))
    logger.info(f"Evaluated {report.n_windows} windows: dl_rmse={report.dl_rmse:.4f} m, dpsi_rmse={report.dpsi_rmse:.4f} rad")
    return report


def predictions_frame(windows: Sequence[LabelledWindow], pred: np.ndarray) -> pd.DataFrame:
    """Per-window predicted and true polar vectors."""
    labels = stack_labels(windows)
    return pd.DataFrame(
        {
            "k": np.arange(len(windows)),
            "t_start": [w.t_start for w in windows],
            "dl_true": labels[:, 0],
            "dpsi_true": labels[:, 1],
            "dl_pred": pred[:, 0],
            "dpsi_pred": pred[:, 1],
        }
    )


def latent_domain_gap(
    bundle: ModelBundle,
    source: Sequence["Window | LabelledWindow"],
    target: Sequence["Window | LabelledWindow"],
    norm: NormStats | None = None,
) -> float:
    """Squared MMD between time-averaged latent codes of two window sets."""
    codes_s = latent_codes(bundle, _normalised(bundle, source, norm))
    codes_t = latent_codes(bundle, _normalised(bundle, target, norm))
    return mmd2(codes_s, codes_t)
