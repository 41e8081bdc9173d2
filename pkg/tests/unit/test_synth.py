"""
Unit test file.
"""

import math
import unittest

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import ks_2samp

from motion_transformer.config import parse_config
from motion_transformer.dataio import PoseTrack, Window, label_window
from motion_transformer.imu_core import UnitQuaternion, strapdown_displacement
from motion_transformer.synth import (
    DEFAULT_PRESETS,
    PRESETS,
    DomainTransform,
    WalkParams,
    generate_bundle,
    make_domain_bundles,
    make_domain_pair,
    preset,
    render_imu,
    simulate_walk,
)
from motion_transformer.types import GRAVITY, DomainTag, UsageError


def _stationary(n: int) -> PoseTrack:
    zeros = np.zeros(n + 1)
    return PoseTrack(t=np.arange(n + 1) / 100.0, x=zeros, y=zeros, psi=zeros)


class WalkTests(unittest.TestCase):
    """Random-walk motion model."""

    def test_straight_line(self) -> None:
        walk = WalkParams(duration=20.0, speed_mean=1.4, speed_jitter=0.0, turn_rate_std=0.0, step_amp=0.0, seed=1)
        trace = simulate_walk(walk)
        self.assertEqual(len(trace.poses), 2001)
        self.assertTrue(np.all(trace.poses.psi == 0.0))
        self.assertTrue(np.all(trace.poses.y == 0.0))
        self.assertTrue(np.allclose(trace.poses.x, 1.4 * trace.poses.t, atol=1e-9, rtol=0))
        self.assertLess(float(np.max(np.abs(trace.nav_acc))), 1e-6)
        self.assertTrue(np.all(trace.nav_gyro == 0.0))

    def test_accelerations_match_pose_differences(self) -> None:
        trace = simulate_walk(WalkParams(duration=30.0, seed=5))
        dt = 1.0 / trace.rate_hz
        xy = np.column_stack([trace.poses.x, trace.poses.y])
        second = (xy[2:] - 2.0 * xy[1:-1] + xy[:-2]) / dt**2
        self.assertLess(float(np.max(np.abs(second - trace.nav_acc[1:, :2]))), 1e-6)

    def test_deterministic(self) -> None:
        walk = WalkParams(duration=30.0, seed=11)
        a = generate_bundle(walk, PRESETS["synthetic-pocket"])
        b = generate_bundle(walk, PRESETS["synthetic-pocket"])
        self.assertTrue(np.array_equal(a.imu.a, b.imu.a))
        self.assertTrue(np.array_equal(a.imu.w, b.imu.w))
        self.assertTrue(np.array_equal(a.poses.x, b.poses.x))
        self.assertTrue(np.array_equal(a.attitude, b.attitude))

    def test_seed_changes_walk(self) -> None:
        a = simulate_walk(WalkParams(duration=30.0, seed=1))
        b = simulate_walk(WalkParams(duration=30.0, seed=2))
        self.assertFalse(np.array_equal(a.poses.x, b.poses.x))

    def test_path_length(self) -> None:
        steady = simulate_walk(WalkParams(duration=60.0, speed_mean=1.4, speed_jitter=0.0, seed=3))
        self.assertAlmostEqual(steady.distance, 84.0, delta=1e-3)
        jittered = simulate_walk(WalkParams(duration=60.0, speed_mean=1.4, seed=3))
        self.assertAlmostEqual(jittered.distance, float(trapezoid(jittered.speed, jittered.poses.t)), delta=1e-3)
        polyline = float(np.sum(np.hypot(np.diff(jittered.poses.x), np.diff(jittered.poses.y))))
        self.assertAlmostEqual(polyline, jittered.distance, delta=1e-2)

    def test_invalid_params(self) -> None:
        with self.assertRaises(UsageError):
            WalkParams(duration=0.0)
        with self.assertRaises(UsageError):
            WalkParams(step_freq=4.0)
        with self.assertRaises(UsageError):
            WalkParams(speed_mean=-1.0)

    def test_from_section(self) -> None:
        sections = parse_config("[walk]\nduration = 60\nspeed_mean = 1.2\nseed = 4\n").sections
        walk = WalkParams.from_section(sections["walk"], seed=9, duration=None)
        self.assertEqual(walk.duration, 60.0)
        self.assertEqual(walk.speed_mean, 1.2)
        self.assertEqual(walk.seed, 9)
        with self.assertRaises(UsageError):
            WalkParams.from_section(parse_config("[walk]\nlegs = 3\n").sections["walk"])


class RenderTests(unittest.TestCase):
    """Sensor-frame rendering."""

    def test_identity_stationary(self) -> None:
        imu = render_imu(_stationary(100), np.zeros((100, 3)), np.zeros((100, 3)), PRESETS["identity"])
        self.assertTrue(np.allclose(imu.a, [0.0, 0.0, GRAVITY], atol=1e-12, rtol=0))
        self.assertTrue(np.allclose(imu.w, 0.0, atol=1e-12, rtol=0))

    def test_quarter_turn_mount_permutes_axes(self) -> None:
        transform = DomainTransform(name="yaw90", rot=UnitQuaternion.from_yaw(math.pi / 2))
        nav_acc = np.random.default_rng(0).normal(size=(100, 3))
        imu = render_imu(_stationary(100), nav_acc, np.zeros((100, 3)), transform)
        self.assertLess(float(np.max(np.abs(imu.a[:, 0] - nav_acc[:, 1]))), 1e-12)

    def test_misaligned_inputs(self) -> None:
        with self.assertRaises(UsageError):
            render_imu(_stationary(10), np.zeros((9, 3)), np.zeros((9, 3)), PRESETS["identity"])

    def test_strapdown_matches_labels(self) -> None:
        bundle = generate_bundle(WalkParams(duration=300.0, seed=6), PRESETS["identity"])
        frames = np.column_stack([bundle.imu.a, bundle.imu.w])
        rng = np.random.default_rng(1)
        for k in rng.integers(0, len(bundle.imu) - 200, size=100):
            k = int(k)
            window = Window(frames=frames[k : k + 200], domain=bundle.domain, t_start=float(bundle.imu.t[k]))
            polar = strapdown_displacement(window, bundle.attitude_at(k), bundle.nav_vel[k])
            label = label_window(window, bundle.poses)
            self.assertAlmostEqual(polar.dl, label.dl, delta=1e-3)
            self.assertAlmostEqual(polar.dpsi, label.dpsi, delta=1e-3)

    def test_gravity_dominates(self) -> None:
        walk = WalkParams(duration=60.0, seed=8)
        for name in (*DEFAULT_PRESETS, "synthetic-handbag"):
            imu = generate_bundle(walk, preset(name)).imu
            norms = np.linalg.norm(imu.a, axis=1)
            means = norms[: len(norms) // 200 * 200].reshape(-1, 200).mean(axis=1)
            self.assertTrue(np.all((means >= 8.0) & (means <= 12.0)), name)

    def test_unknown_preset(self) -> None:
        with self.assertRaises(UsageError):
            preset("synthetic-backpack")

    def test_handbag_tilt_between_handheld_and_pocket(self) -> None:
        walk = WalkParams(duration=60.0, seed=9)

        def gravity_direction(name: str) -> np.ndarray:
            mean = generate_bundle(walk, preset(name)).imu.a.mean(axis=0)
            return mean / np.linalg.norm(mean)

        handheld = gravity_direction("synthetic-handheld")
        to_handbag = math.acos(float(np.clip(handheld @ gravity_direction("synthetic-handbag"), -1.0, 1.0)))
        to_pocket = math.acos(float(np.clip(handheld @ gravity_direction("synthetic-pocket"), -1.0, 1.0)))
        self.assertGreater(to_handbag, 0.3)
        self.assertLess(to_handbag, to_pocket)
        self.assertNotIn("synthetic-handbag", DEFAULT_PRESETS)


class DomainPairTests(unittest.TestCase):
    """Unpaired source and target recordings."""

    def test_seed_collision_rejected(self) -> None:
        walk = WalkParams(duration=10.0, seed=3)
        with self.assertRaises(UsageError):
            make_domain_bundles(walk, PRESETS["synthetic-handheld"], PRESETS["synthetic-pocket"], target_seed=3)
        with self.assertRaises(UsageError):
            make_domain_bundles(walk, PRESETS["synthetic-pocket"], PRESETS["synthetic-pocket"])

    def test_bundles_are_unpaired(self) -> None:
        bundles = make_domain_bundles(WalkParams(duration=20.0, seed=0), PRESETS["synthetic-handheld"], PRESETS["synthetic-pocket"])
        self.assertEqual(bundles.source.domain, DomainTag("synthetic-handheld"))
        self.assertEqual(bundles.target.domain, DomainTag("synthetic-pocket"))
        self.assertFalse(np.array_equal(bundles.source.poses.x, bundles.target.poses.x))
        self.assertEqual(len(bundles.target_eval.imu), 400)

    def test_label_distributions_agree(self) -> None:
        walk = WalkParams(duration=2000.0, seed=20)
        source, target, target_eval = make_domain_pair(
            walk, PRESETS["synthetic-handheld"], PRESETS["synthetic-pocket"], n=200, stride=200, eval_duration=2000.0
        )
        self.assertEqual(len(source), 1000)
        self.assertEqual(len(target), 1000)
        self.assertEqual(len(target_eval), 1000)
        stat = ks_2samp([w.label.dl for w in source], [w.label.dl for w in target_eval]).statistic
        self.assertLess(float(stat), 0.1)


if __name__ == "__main__":
    unittest.main()
