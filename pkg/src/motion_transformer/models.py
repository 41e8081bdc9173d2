"""
Encoder, per-domain generators, decoder, polar predictor and per-domain
discriminators.

    encode:       (B, n, 6)   -> bi-GRU -> mean-pool x4 -> linear -> (B, n/4, d_z)
    generate:     (B, L, d_z) -> GRU -> linear to 4 frames per step -> (B, 4L, 6)
    decode:       same shape contract as generate, one domain-agnostic set
    predict:      (B, L, d_z) -> GRU -> last state -> linear -> (B, 2) = (softplus dl, dpsi)
    discriminate: (B, n, 6)   -> 3 x (conv k3 s2 + tanh) -> GRU -> last state -> linear -> (B, 1)
"""

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import numpy as np

from motion_transformer.dataio import CHANNELS, NormStats, Window
from motion_transformer.nn import (
    ParamSet,
    Tensor,
    add_conv1d,
    add_gru,
    add_linear,
    bidirectional_gru,
    concat,
    conv1d,
    gru_sequence,
    linear,
    load_checkpoint,
    mean,
    reshape,
    save_checkpoint,
    softplus,
    tanh,
)
from motion_transformer.types import DataError, DomainTag, EvalMode, UsageError
from motion_transformer.util import stable_key

logger = logging.getLogger(__name__)

POOL = 4


@dataclass(frozen=True)
class ModelArch:
    window: int = 200
    d_z: int = 64
    hidden: int = 16
    source: str = "source"
    target: str = "target"

    def __post_init__(self):
        if self.window < POOL or self.window % POOL:
            raise UsageError(f"Window length must be a positive multiple of {POOL}, got {self.window}")
        if self.d_z < 1 or self.hidden < 1:
            raise UsageError("d_z and hidden must be positive")
        if self.source == self.target:
            raise UsageError("source and target domains must differ")

    @property
    def latent_length(self) -> int:
        return self.window // POOL

    @property
    def domains(self) -> tuple[str, str]:
        return (self.source, self.target)

    def to_json(self) -> dict[str, Any]:
        return asdict(self)

    @staticmethod
    def from_json(data: dict[str, Any]) -> "ModelArch":
        return ModelArch(**data)


def _domain_name(domain: "DomainTag | str") -> str:
    return domain.name if isinstance(domain, DomainTag) else domain


class ModelBundle:
    """All parameter sets of one source/target adaptation pair."""

    def __init__(self, arch: ModelArch, seed: int = 0):
        self.arch = arch
        self.seed = seed
        self.norm: NormStats | None = None
        h, d_z = arch.hidden, arch.d_z
        self.encoder = ParamSet("encoder")
        add_gru(self.encoder, "fwd", CHANNELS, h, self._rng("encoder.fwd"))
        add_gru(self.encoder, "bwd", CHANNELS, h, self._rng("encoder.bwd"))
        add_linear(self.encoder, "proj", 2 * h, d_z, self._rng("encoder.proj"))

        self.decoder = self._sequence_decoder("decoder")
        self.generators = {d: self._sequence_decoder(f"generator.{d}") for d in arch.domains}

        self.predictor = ParamSet("predictor")
        add_gru(self.predictor, "gru", d_z, h, self._rng("predictor.gru"))
        add_linear(self.predictor, "head", h, 2, self._rng("predictor.head"))

        self.discriminators = {d: self._discriminator(f"discriminator.{d}") for d in arch.domains}

    def __repr__(self) -> str:
        total = sum(p.num_params for p in self.groups().values())
        return f"ModelBundle({self.arch}, {total} parameters)"

    def _rng(self, key: str) -> np.random.Generator:
        return np.random.default_rng([self.seed, stable_key(key)])

    def _sequence_decoder(self, name: str) -> ParamSet:
        params = ParamSet(name)
        add_gru(params, "gru", self.arch.d_z, self.arch.hidden, self._rng(f"{name}.gru"))
        add_linear(params, "up", self.arch.hidden, POOL * CHANNELS, self._rng(f"{name}.up"))
        return params

    def _discriminator(self, name: str) -> ParamSet:
        h = self.arch.hidden
        params = ParamSet(name)
        add_conv1d(params, "conv1", CHANNELS, h, 3, self._rng(f"{name}.conv1"))
        add_conv1d(params, "conv2", h, h, 3, self._rng(f"{name}.conv2"))
        add_conv1d(params, "conv3", h, h, 3, self._rng(f"{name}.conv3"))
        add_gru(params, "gru", h, h, self._rng(f"{name}.gru"))
        add_linear(params, "head", h, 1, self._rng(f"{name}.head"))
        return params

    def generator(self, domain: "DomainTag | str") -> ParamSet:
        name = _domain_name(domain)
        if name not in self.generators:
            raise UsageError(f"Domain '{name}' is not registered, expected one of {list(self.generators)}")
        return self.generators[name]

    def discriminator(self, domain: "DomainTag | str") -> ParamSet:
        name = _domain_name(domain)
        if name not in self.discriminators:
            raise UsageError(f"Domain '{name}' is not registered, expected one of {list(self.discriminators)}")
        return self.discriminators[name]

    def groups(self) -> dict[str, ParamSet]:
        out = {"encoder": self.encoder, "decoder": self.decoder, "predictor": self.predictor}
        for params in (*self.generators.values(), *self.discriminators.values()):
            out[params.name] = params
        return out

    def generator_side(self) -> list[ParamSet]:
        """Everything the generator half-step updates."""
        return [self.encoder, *self.generators.values(), self.decoder, self.predictor]

    def discriminator_side(self) -> list[ParamSet]:
        return list(self.discriminators.values())

    def predictor_path(self) -> list[ParamSet]:
        return [self.encoder, self.predictor]

    def arrays(self) -> dict[str, dict[str, np.ndarray]]:
        return {name: params.arrays() for name, params in self.groups().items()}

    def load_arrays(self, arrays: dict[str, dict[str, np.ndarray]]) -> None:
        groups = self.groups()
        if set(arrays) != set(groups):
            raise DataError(f"Checkpoint parameter sets {sorted(arrays)} do not match {sorted(groups)}")
        for name, params in groups.items():
            params.load_arrays(arrays[name])


def as_batch(x: "Tensor | Window | np.ndarray") -> Tensor:
    if isinstance(x, Tensor):
        return x
    if isinstance(x, Window):
        return Tensor(x.frames[None, :, :])
    arr = np.asarray(x, dtype=np.float64)
    return Tensor(arr[None] if arr.ndim == 2 else arr)


def _check_frames(bundle: ModelBundle, x: Tensor, op: str) -> None:
    if x.ndim != 3 or x.shape[1] != bundle.arch.window or x.shape[2] != CHANNELS:
        raise UsageError(f"{op}: expected (B, {bundle.arch.window}, {CHANNELS}) frames, got {x.shape}")


def _check_latent(bundle: ModelBundle, z: Tensor, op: str) -> None:
    if z.ndim != 3 or z.shape[1] != bundle.arch.latent_length or z.shape[2] != bundle.arch.d_z:
        raise UsageError(f"{op}: expected (B, {bundle.arch.latent_length}, {bundle.arch.d_z}) latent, got {z.shape}")


def encode(bundle: ModelBundle, x: "Tensor | Window | np.ndarray") -> Tensor:
    x = as_batch(x)
    _check_frames(bundle, x, "encode")
    batch, n, _ = x.shape
    h = bidirectional_gru(x, bundle.encoder, "fwd", "bwd")
    pooled = mean(reshape(h, (batch, n // POOL, POOL, 2 * bundle.arch.hidden)), axis=2)
    return linear(pooled, bundle.encoder, "proj")


def _sequence_decode(bundle: ModelBundle, z: Tensor, params: ParamSet) -> Tensor:
    batch, length, _ = z.shape
    h, _ = gru_sequence(z, params, "gru")
    return reshape(linear(h, params, "up"), (batch, POOL * length, CHANNELS))


def generate(bundle: ModelBundle, z: Tensor, domain: "DomainTag | str") -> Tensor:
    params = bundle.generator(domain)
    _check_latent(bundle, z, "generate")
    return _sequence_decode(bundle, z, params)


def decode(bundle: ModelBundle, z: Tensor) -> Tensor:
    _check_latent(bundle, z, "decode")
    return _sequence_decode(bundle, z, bundle.decoder)


def predict_polar(bundle: ModelBundle, z: Tensor) -> Tensor:
    """(B, 2) rows of (dl >= 0, unwrapped dpsi)."""
    _check_latent(bundle, z, "predict_polar")
    _, h = gru_sequence(z, bundle.predictor, "gru")
    out = linear(h, bundle.predictor, "head")
    return concat([softplus(out[:, 0:1]), out[:, 1:2]], axis=1)


def discriminate(bundle: ModelBundle, x: "Tensor | Window | np.ndarray", domain: "DomainTag | str") -> Tensor:
    params = bundle.discriminator(domain)
    x = as_batch(x)
    _check_frames(bundle, x, "discriminate")
    h = tanh(conv1d(x, params, "conv1"))
    h = tanh(conv1d(h, params, "conv2"))
    h = tanh(conv1d(h, params, "conv3"))
    _, last = gru_sequence(h, params, "gru")
    return linear(last, params, "head")


@dataclass
class LoadedModel:
    bundle: ModelBundle
    norm: NormStats
    mode: EvalMode
    meta: dict[str, Any]


def save_bundle(path: Path, bundle: ModelBundle, mode: EvalMode, norm: NormStats | None = None, extra: dict[str, Any] | None = None) -> None:
    norm = norm if norm is not None else bundle.norm
    if norm is None:
        raise UsageError("Cannot save a model without normalisation statistics")
    meta = {
        "arch": bundle.arch.to_json(),
        "seed": bundle.seed,
        "domains": list(bundle.arch.domains),
        "norm": {"mean": norm.mean.tolist(), "std": norm.std.tolist()},
        "mode": mode.value,
        **(extra or {}),
    }
    save_checkpoint(path, bundle.groups(), meta)
    logger.info(f"Saved {mode.value} checkpoint to {path}")


def load_bundle(path: Path) -> LoadedModel:
    arrays, meta = load_checkpoint(path)
    try:
        arch = ModelArch.from_json(meta["arch"])
        norm = NormStats(mean=np.array(meta["norm"]["mean"]), std=np.array(meta["norm"]["std"]))
        mode = EvalMode(meta["mode"])
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"Checkpoint {path} has an invalid meta record: {e}") from e
    bundle = ModelBundle(arch, seed=int(meta.get("seed", 0)))
    bundle.load_arrays(arrays)
    bundle.norm = norm
    return LoadedModel(bundle=bundle, norm=norm, mode=mode, meta=meta)
