import math
from dataclasses import asdict, dataclass
from functools import cached_property
from typing import Any

import numpy as np

from motion_transformer.config import LossWeights
from motion_transformer.models import ModelBundle, as_batch, decode, discriminate, encode, generate, predict_polar
from motion_transformer.nn import Tensor, lsq, mse, sum_
from motion_transformer.types import DomainTag

LOSS_COLUMNS = ("gan", "ae", "pred", "cycle", "percep", "total")
HISTORY_HEADER = "step," + ",".join(LOSS_COLUMNS)


@dataclass(frozen=True)
class LossReport:
    gan: float
    ae: float
    pred: float
    cycle: float
    percep: float
    total: float

    @staticmethod
    def compose(gan: float, ae: float, pred: float, cycle: float, percep: float, weights: LossWeights) -> "LossReport":
        total = total_loss((gan, ae, pred, cycle, percep), weights)
        return LossReport(gan=gan, ae=ae, pred=pred, cycle=cycle, percep=percep, total=float(total))

    def components(self) -> tuple[float, float, float, float, float]:
        return (self.gan, self.ae, self.pred, self.cycle, self.percep)

    def csv_row(self, step: int) -> str:
        return ",".join([str(step)] + [repr(float(getattr(self, c))) for c in LOSS_COLUMNS])

    def to_json(self) -> dict[str, float]:
        return asdict(self)


def total_loss(components: Any, weights: LossWeights) -> Any:
    """gan + l1*ae + l2*pred + l3*cycle + l4*percep for floats or tensors."""
    if isinstance(components, LossReport):
        components = components.components()
    gan, ae, pred, cycle, percep = components
    return gan + weights.lambda1 * ae + weights.lambda2 * pred + weights.lambda3 * cycle + weights.lambda4 * percep


class Translation:
    """Lazily shared forward passes of one source/target batch pair."""

    def __init__(
        self,
        bundle: ModelBundle,
        x_s: Any,
        x_t: Any,
        source: "DomainTag | str | None" = None,
        target: "DomainTag | str | None" = None,
    ):
        self.bundle = bundle
        self.x_s = as_batch(x_s)
        self.x_t = as_batch(x_t)
        self.source = source if source is not None else bundle.arch.source
        self.target = target if target is not None else bundle.arch.target
        # resolve early so unregistered domains fail before any work
        bundle.generator(self.source)
        bundle.generator(self.target)

    @cached_property
    def z_s(self) -> Tensor:
        return encode(self.bundle, self.x_s)

    @cached_property
    def z_t(self) -> Tensor:
        return encode(self.bundle, self.x_t)

    @cached_property
    def fake_t(self) -> Tensor:
        return generate(self.bundle, self.z_s, self.target)

    @cached_property
    def fake_s(self) -> Tensor:
        return generate(self.bundle, self.z_t, self.source)

    @cached_property
    def z_fake_t(self) -> Tensor:
        return encode(self.bundle, self.fake_t)

    @cached_property
    def z_fake_s(self) -> Tensor:
        return encode(self.bundle, self.fake_s)

    @cached_property
    def pred_s(self) -> Tensor:
        return predict_polar(self.bundle, self.z_s)

    @cached_property
    def pred_t(self) -> Tensor:
        return predict_polar(self.bundle, self.z_t)

    @cached_property
    def pred_fake_t(self) -> Tensor:
        return predict_polar(self.bundle, self.z_fake_t)

    @cached_property
    def pred_fake_s(self) -> Tensor:
        return predict_polar(self.bundle, self.z_fake_s)


def _translation(bundle: ModelBundle, x_s: Any, x_t: Any, source: Any, target: Any, cache: Translation | None) -> Translation:
    return cache if cache is not None else Translation(bundle, x_s, x_t, source, target)


def discriminator_loss(bundle: ModelBundle, x_s: Any, x_t: Any, source: Any = None, target: Any = None, cache: Translation | None = None) -> Tensor:
    tr = _translation(bundle, x_s, x_t, source, target, cache)
    on_target = lsq(discriminate(bundle, tr.x_t, tr.target), 1.0) + lsq(discriminate(bundle, tr.fake_t.detach(), tr.target), 0.0)
    on_source = lsq(discriminate(bundle, tr.x_s, tr.source), 1.0) + lsq(discriminate(bundle, tr.fake_s.detach(), tr.source), 0.0)
    return (on_target + on_source) * 0.5


def generator_gan_loss(bundle: ModelBundle, x_s: Any, x_t: Any, source: Any = None, target: Any = None, cache: Translation | None = None) -> Tensor:
    tr = _translation(bundle, x_s, x_t, source, target, cache)
    return lsq(discriminate(bundle, tr.fake_t, tr.target), 1.0) + lsq(discriminate(bundle, tr.fake_s, tr.source), 1.0)


def gan_losses(bundle: ModelBundle, x_s: Any, x_t: Any, source: Any = None, target: Any = None, cache: Translation | None = None) -> tuple[Tensor, Tensor]:
    """Least-squares GAN in both translation directions: (disc_loss, gen_loss)."""
    tr = _translation(bundle, x_s, x_t, source, target, cache)
    return discriminator_loss(bundle, x_s, x_t, cache=tr), generator_gan_loss(bundle, x_s, x_t, cache=tr)


def ae_loss(bundle: ModelBundle, x: Any, z: Tensor | None = None) -> Tensor:
    x = as_batch(x)
    z = z if z is not None else encode(bundle, x)
    return mse(decode(bundle, z), x)


def _wrapped_offsets(diff: np.ndarray) -> np.ndarray:
    offsets = np.zeros_like(diff)
    offsets[:, 1] = 2.0 * math.pi * np.round(diff[:, 1] / (2.0 * math.pi))
    return offsets


def polar_error(pred: Tensor, y: Any) -> Tensor:
    """Batch mean of dl error squared plus wrapped dpsi error squared."""
    y = np.asarray(y.values if isinstance(y, Tensor) else y, dtype=np.float64).reshape(-1, 2)
    diff = pred - Tensor(y)
    wrapped = diff - Tensor(_wrapped_offsets(diff.values))
    return sum_(wrapped * wrapped) * (1.0 / max(len(y), 1))


def pred_loss(bundle: ModelBundle, x_s: Any, y_s: Any, z: Tensor | None = None) -> Tensor:
    z = z if z is not None else encode(bundle, as_batch(x_s))
    return polar_error(predict_polar(bundle, z), y_s)


def cycle_loss(bundle: ModelBundle, x_s: Any, x_t: Any, source: Any = None, target: Any = None, cache: Translation | None = None) -> Tensor:
    tr = _translation(bundle, x_s, x_t, source, target, cache)
    back_s = generate(bundle, tr.z_fake_t, tr.source)
    back_t = generate(bundle, tr.z_fake_s, tr.target)
    return mse(back_s, tr.x_s) + mse(back_t, tr.x_t)


def percep_loss(bundle: ModelBundle, x_s: Any, x_t: Any, source: Any = None, target: Any = None, cache: Translation | None = None) -> Tensor:
    """Translation keeps what the encoder and the motion head perceive.

    latent: E(G_t(z_s)) matches z_s and E(G_s(z_t)) matches z_t.
    motion: the polar vector read from a source window's target-style
    translation matches the one read from the source window, and the polar
    vector read from a target window matches the one read from its
    source-style translation.

    The second member of every pair is a constant.
    """
    tr = _translation(bundle, x_s, x_t, source, target, cache)
    latent = mse(tr.z_fake_t, tr.z_s.detach()) + mse(tr.z_fake_s, tr.z_t.detach())
    motion = polar_error(tr.pred_fake_t, tr.pred_s.detach()) + polar_error(tr.pred_t, tr.pred_fake_s.detach())
    return latent + motion
