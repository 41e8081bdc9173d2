"""
Unit test file.
"""

import tempfile
import unittest
from pathlib import Path

import numpy as np

from motion_transformer.dataio import NormStats, Window
from motion_transformer.models import (
    ModelArch,
    ModelBundle,
    decode,
    discriminate,
    encode,
    generate,
    load_bundle,
    predict_polar,
    save_bundle,
)
from motion_transformer.nn import Tensor, grad_check, mse
from motion_transformer.types import DataError, DomainTag, EvalMode, UsageError

TINY = ModelArch(window=8, d_z=4, hidden=2, source="src", target="tgt")
TOLERANCE = 1e-4


def _frames(rng: np.random.Generator, batch: int = 1, n: int = 8) -> Tensor:
    return Tensor(rng.normal(size=(batch, n, 6)))


class ShapeTests(unittest.TestCase):
    """Shape contracts and routing."""

    def setUp(self) -> None:
        self.rng = np.random.default_rng(0)

    def test_default_latent_length(self) -> None:
        bundle = ModelBundle(ModelArch(window=200, d_z=8, hidden=4), seed=1)
        z = encode(bundle, Window(frames=self.rng.normal(size=(200, 6)), domain=DomainTag("source"), t_start=0.0))
        self.assertEqual(z.shape, (1, 50, 8))

    def test_encode_deterministic(self) -> None:
        bundle = ModelBundle(TINY, seed=2)
        x = self.rng.normal(size=(8, 6))
        self.assertTrue(np.array_equal(encode(bundle, x).values, encode(bundle, x.copy()).values))

    def test_same_seed_same_bundle(self) -> None:
        a, b = ModelBundle(TINY, seed=3), ModelBundle(TINY, seed=3)
        for name, params in a.groups().items():
            for key, tensor in params.items():
                self.assertTrue(np.array_equal(tensor.values, b.groups()[name][key].values), f"{name}/{key}")

    def test_output_shapes(self) -> None:
        bundle = ModelBundle(TINY, seed=4)
        z = encode(bundle, _frames(self.rng, batch=3))
        self.assertEqual(z.shape, (3, 2, 4))
        self.assertEqual(generate(bundle, z, "tgt").shape, (3, 8, 6))
        self.assertEqual(decode(bundle, z).shape, (3, 8, 6))
        self.assertEqual(predict_polar(bundle, z).shape, (3, 2))
        self.assertEqual(discriminate(bundle, _frames(self.rng, batch=3), "src").shape, (3, 1))

    def test_dl_is_non_negative(self) -> None:
        bundle = ModelBundle(TINY, seed=5)
        z = Tensor(self.rng.normal(scale=10.0, size=(50, 2, 4)))
        self.assertTrue(np.all(predict_polar(bundle, z).values[:, 0] >= 0.0))

    def test_wrong_frame_count(self) -> None:
        bundle = ModelBundle(TINY, seed=0)
        with self.assertRaises(UsageError):
            encode(bundle, _frames(self.rng, n=12))
        with self.assertRaises(UsageError):
            decode(bundle, Tensor(np.zeros((1, 3, 4))))

    def test_unknown_domain(self) -> None:
        bundle = ModelBundle(TINY, seed=0)
        z = encode(bundle, _frames(self.rng))
        with self.assertRaises(UsageError):
            generate(bundle, z, DomainTag("trolley"))
        with self.assertRaises(UsageError):
            discriminate(bundle, _frames(self.rng), "trolley")

    def test_routing_ignores_other_domain(self) -> None:
        bundle = ModelBundle(TINY, seed=6)
        x = _frames(self.rng)
        z = encode(bundle, x)
        gen_before = generate(bundle, z, "src").values
        disc_before = discriminate(bundle, x, "src").values
        for params in (bundle.generator("tgt"), bundle.discriminator("tgt")):
            for _, tensor in params.items():
                tensor.values = tensor.values + 1.0
        self.assertTrue(np.array_equal(generate(bundle, z, "src").values, gen_before))
        self.assertTrue(np.array_equal(discriminate(bundle, x, "src").values, disc_before))

    def test_encoder_is_shared(self) -> None:
        bundle = ModelBundle(TINY, seed=0)
        self.assertIs(bundle.generator_side()[0], bundle.encoder)
        self.assertIs(bundle.predictor_path()[0], bundle.encoder)
        self.assertEqual(len(bundle.groups()), 7)

    def test_window_must_divide(self) -> None:
        with self.assertRaises(UsageError):
            ModelArch(window=10)
        with self.assertRaises(UsageError):
            ModelArch(source="a", target="a")


class ModelGradTests(unittest.TestCase):
    """Finite-difference checks on a tiny instantiation."""

    def setUp(self) -> None:
        self.rng = np.random.default_rng(11)
        self.bundle = ModelBundle(TINY, seed=12)
        self.x = _frames(self.rng)

    def test_encoder(self) -> None:
        self.assertLess(grad_check(lambda: encode(self.bundle, self.x).sum(), [self.bundle.encoder]), TOLERANCE)

    def test_generator(self) -> None:
        z = Tensor(self.rng.normal(size=(1, 2, 4)))
        params = self.bundle.generator("tgt")
        self.assertLess(grad_check(lambda: mse(generate(self.bundle, z, "tgt"), np.zeros((1, 8, 6))), [params]), TOLERANCE)

    def test_decoder(self) -> None:
        z = Tensor(self.rng.normal(size=(1, 2, 4)))
        self.assertLess(grad_check(lambda: decode(self.bundle, z).sum(), [self.bundle.decoder]), TOLERANCE)

    def test_predictor(self) -> None:
        z = Tensor(self.rng.normal(size=(1, 2, 4)))
        self.assertLess(grad_check(lambda: predict_polar(self.bundle, z).sum(), [self.bundle.predictor]), TOLERANCE)

    def test_discriminator(self) -> None:
        params = self.bundle.discriminator("src")
        self.assertLess(grad_check(lambda: discriminate(self.bundle, self.x, "src").sum(), [params]), TOLERANCE)

    def test_end_to_end(self) -> None:
        b = self.bundle

        def f() -> Tensor:
            z = encode(b, self.x)
            fake = generate(b, z, "tgt")
            return discriminate(b, fake, "tgt").sum() + mse(decode(b, z), self.x) + predict_polar(b, z).sum()

        groups = [b.encoder, b.generator("tgt"), b.decoder, b.predictor, b.discriminator("tgt")]
        self.assertLess(grad_check(f, groups), TOLERANCE)


class BundleIoTests(unittest.TestCase):
    """Checkpoint save and load."""

    def setUp(self) -> None:
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.norm = NormStats(mean=np.arange(6.0), std=np.full(6, 2.0))

    def tearDown(self) -> None:
        self.tmp.cleanup()

    def test_round_trip(self) -> None:
        bundle = ModelBundle(TINY, seed=21)
        path = self.dir / "model.ckpt"
        save_bundle(path, bundle, EvalMode.ADAPTED, norm=self.norm, extra={"step": 5})
        loaded = load_bundle(path)
        self.assertEqual(loaded.bundle.arch, TINY)
        self.assertEqual(loaded.mode, EvalMode.ADAPTED)
        self.assertEqual(loaded.meta["step"], 5)
        self.assertTrue(np.array_equal(loaded.norm.std, self.norm.std))
        x = _frames(np.random.default_rng(0))
        self.assertTrue(np.array_equal(encode(loaded.bundle, x).values, encode(bundle, x).values))

    def test_needs_norm(self) -> None:
        with self.assertRaises(UsageError):
            save_bundle(self.dir / "model.ckpt", ModelBundle(TINY), EvalMode.SOURCE_ONLY)

    def test_missing_checkpoint(self) -> None:
        with self.assertRaises(DataError):
            load_bundle(self.dir / "missing.ckpt")


if __name__ == "__main__":
    unittest.main()
