"""
Unit test file.
"""

import tempfile
import unittest
from pathlib import Path

from motion_transformer.config import (
    DatasetManifest,
    LossWeights,
    TrainConfig,
    coerce_value,
    parse_config,
)
from motion_transformer.types import DataError, UsageError

_CONFIG = """
# adaptation run
source = source
target = trolley
window = 200
d_z = 8
lambda1 = 0.01
lambda2 = 100
lambda3 = 0.1
lambda4 = 1
lr = 0.001
batch_size = 64
steps = 3000
disc_steps_per_gen_step = 1
seed = 7
"""


class ParseTests(unittest.TestCase):
    """key = value parsing."""

    def test_sections_and_comments(self) -> None:
        parsed = parse_config("a = 1\n; note\n[walk]\nb = x = y\n")
        self.assertEqual(parsed.root.get("a"), "1")
        self.assertEqual(parsed.sections["walk"].get("b"), "x = y")

    def test_bad_line(self) -> None:
        with self.assertRaises(UsageError) as ctx:
            parse_config("a = 1\nnot a pair\n")
        self.assertIn("line 2", str(ctx.exception))

    def test_coerce(self) -> None:
        self.assertIs(coerce_value("adversarial", "off", bool), False)
        self.assertEqual(coerce_value("steps", "12", int), 12)
        with self.assertRaises(UsageError):
            coerce_value("steps", "1.5", int)
        with self.assertRaises(UsageError):
            coerce_value("adversarial", "maybe", bool)


class TrainConfigTests(unittest.TestCase):
    """Training configuration validation."""

    def test_from_text(self) -> None:
        config = TrainConfig.from_text(_CONFIG)
        self.assertEqual(config.target, "trolley")
        self.assertEqual(config.lambda2, 100.0)
        self.assertEqual(config.steps, 3000)
        self.assertEqual(config.weights, LossWeights())
        self.assertTrue(config.adversarial)

    def test_text_round_trip(self) -> None:
        config = TrainConfig.from_text(_CONFIG + "adversarial = false\n")
        self.assertEqual(TrainConfig.from_text(config.to_text()), config)

    def test_missing_key_named(self) -> None:
        text = _CONFIG.replace("lr = 0.001\n", "")
        with self.assertRaises(UsageError) as ctx:
            TrainConfig.from_text(text)
        self.assertIn("'lr'", str(ctx.exception))

    def test_unknown_key(self) -> None:
        with self.assertRaises(UsageError) as ctx:
            TrainConfig.from_text(_CONFIG + "learning_rate = 0.1\n")
        self.assertIn("learning_rate", str(ctx.exception))

    def test_invalid_values(self) -> None:
        for old, new in (("lr = 0.001", "lr = 0"), ("lambda3 = 0.1", "lambda3 = -1"), ("target = trolley", "target = source")):
            with self.assertRaises(UsageError, msg=new):
                TrainConfig.from_text(_CONFIG.replace(old, new))

    def test_overrides(self) -> None:
        config = TrainConfig.from_text(_CONFIG)
        changed = config.with_overrides(steps=10, seed=None)
        self.assertEqual(changed.steps, 10)
        self.assertEqual(changed.seed, 7)
        with self.assertRaises(UsageError):
            config.with_overrides(batch_size=0)

    def test_missing_file(self) -> None:
        with self.assertRaises(UsageError):
            TrainConfig.from_file(Path("does-not-exist.conf"))


class DatasetManifestTests(unittest.TestCase):
    """Recording manifests."""

    def setUp(self) -> None:
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self) -> None:
        self.tmp.cleanup()

    def test_round_trip(self) -> None:
        manifest = DatasetManifest(imu=self.dir / "imu.csv", poses=self.dir / "poses.csv", domain="handbag", rate=100.0)
        manifest.write(self.dir / "manifest.txt")
        self.assertEqual(DatasetManifest.from_file(self.dir), manifest)

    def test_unlabelled(self) -> None:
        (self.dir / "manifest.txt").write_text("imu = imu.csv\ndomain = trolley\nrate = 100\n", encoding="utf-8")
        manifest = DatasetManifest.from_file(self.dir / "manifest.txt")
        self.assertIsNone(manifest.poses)
        self.assertEqual(manifest.rate, 100.0)

    def test_missing_domain(self) -> None:
        (self.dir / "manifest.txt").write_text("imu = imu.csv\nrate = 100\n", encoding="utf-8")
        with self.assertRaises(DataError) as ctx:
            DatasetManifest.from_file(self.dir)
        self.assertIn("'domain'", str(ctx.exception))

    def test_missing_manifest(self) -> None:
        with self.assertRaises(DataError):
            DatasetManifest.from_file(self.dir)

    def test_malformed_manifest(self) -> None:
        for text in ("imu = imu.csv\ndomain = d\nrate = fast\n", "imu = imu.csv\nno separator here\n", "imu = imu.csv\ndomain = d\nrate = 0\n"):
            (self.dir / "manifest.txt").write_text(text, encoding="utf-8")
            with self.assertRaises(DataError, msg=text):
                DatasetManifest.from_file(self.dir)


if __name__ == "__main__":
    unittest.main()
