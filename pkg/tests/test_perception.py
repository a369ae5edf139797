"""Observation model and estimation pipeline tests."""

import math

import numpy as np
import pytest

from ccvo.geometry import DEFAULT_CAMERA, DiscBody, Pose2, Vec2, project_point
from ccvo.perception import (NoiseState, ObstacleObservation, SegmentationMask,
                             SigmaModel, conservative_sigma, estimate_velocity,
                             estimate_from_frames, eval_sigma,
                             flow_displacement_error, flow_from_translation,
                             inflate_radius, masked_centroid, observe,
                             render_disc)
from ccvo.sim import Pedestrian, PedestrianModel, RobotState, WorldState


def make_world(ped_positions, ped_velocities=None, radius=0.3, discs=(),
               robot_heading=math.pi / 2):
    ped_velocities = ped_velocities or [Vec2(0.0, 0.0)] * len(ped_positions)
    peds = tuple(
        Pedestrian(p, v, radius, PedestrianModel("static", 0.0, p))
        for p, v in zip(ped_positions, ped_velocities))
    robot = RobotState(Pose2(Vec2(0.0, 0.0), robot_heading), Vec2(0.0, 0.0))
    return WorldState(robot=robot, pedestrians=peds,
                      static_obstacles=tuple(discs), time=0.0,
                      bounds=(-8, -8, 8, 8))


TINY = SigmaModel("constant", (1e-9,), floor=1e-9)


class TestSigmaModel:
    def test_constant(self):
        m = SigmaModel("constant", (0.1,))
        assert eval_sigma(m, 0.5) == 0.1
        assert eval_sigma(m, 50.0) == 0.1

    def test_affine(self):
        # 0.02 + 0.01*2 = 0.04
        m = SigmaModel("affine", (0.02, 0.01))
        assert eval_sigma(m, 2.0) == pytest.approx(0.04)

    def test_reciprocal_affine(self):
        # 0.01 + 0.1/2 = 0.06, decreasing with distance
        m = SigmaModel("reciprocal_affine", (0.01, 0.1))
        assert eval_sigma(m, 2.0) == pytest.approx(0.06)
        assert eval_sigma(m, 4.0) < eval_sigma(m, 2.0)

    def test_floor_applies_everywhere(self):
        m = SigmaModel("affine", (0.0, 1e-6), floor=0.05)
        for d in np.linspace(0.01, 100.0, 200):
            assert eval_sigma(m, float(d)) >= 0.05

    def test_rejects_nonpositive_distance(self):
        with pytest.raises(ValueError):
            eval_sigma(SigmaModel("constant", (0.1,)), 0.0)

    def test_conservative_sigma_is_range_max(self):
        m = SigmaModel("affine", (0.02, 0.01))
        # increasing form: max at the far end of the range
        assert conservative_sigma(m, 8.0) == pytest.approx(0.1)
        dec = SigmaModel("reciprocal_affine", (0.01, 0.1))
        # decreasing form: max at the near end of the probed range
        assert conservative_sigma(dec, 8.0) == pytest.approx(0.01 + 0.1 / 0.1)


class TestObserve:
    def test_zero_noise_limit(self):
        world = make_world([Vec2(0.0, 2.0)], [Vec2(0.3, -0.1)])
        rng = np.random.default_rng(0)
        obs = observe(world, DEFAULT_CAMERA, TINY, TINY, rng)
        assert len(obs) == 1
        assert obs[0].source == "camera"
        assert obs[0].mean_position.x == pytest.approx(0.0, abs=1e-6)
        assert obs[0].mean_position.y == pytest.approx(2.0, abs=1e-6)
        assert obs[0].mean_velocity.x == pytest.approx(0.3, abs=1e-6)
        assert obs[0].mean_velocity.y == pytest.approx(-0.1, abs=1e-6)

    def test_side_obstacle_is_lidar_only(self):
        # bearing 90 degrees: outside the 70-degree camera, inside the
        # 240-degree Lidar
        world = make_world([Vec2(2.0, 0.0)])
        obs = observe(world, DEFAULT_CAMERA, TINY, TINY,
                      np.random.default_rng(0))
        assert len(obs) == 1
        assert obs[0].source == "lidar_only"
        assert obs[0].mean_velocity is None and obs[0].sigma_v is None
        # default pedestrian radius 0.3 inflated by 1.5
        assert obs[0].radius == pytest.approx(0.45)

    def test_behind_lidar_fov_omitted(self):
        # bearing 180 degrees is outside the 240-degree Lidar fan
        world = make_world([Vec2(0.0, -2.0)])
        obs = observe(world, DEFAULT_CAMERA, TINY, TINY,
                      np.random.default_rng(0))
        assert obs == []

    def test_out_of_range_omitted(self):
        world = make_world([Vec2(0.0, 9.5)])
        assert observe(world, DEFAULT_CAMERA, TINY, TINY,
                       np.random.default_rng(0)) == []

    def test_occlusion(self):
        # the nearer disc blocks the sight line to the farther pedestrian
        world = make_world([Vec2(0.0, 2.0), Vec2(0.0, 4.0)])
        obs = observe(world, DEFAULT_CAMERA, TINY, TINY,
                      np.random.default_rng(0))
        assert len(obs) == 1
        assert obs[0].mean_position.y == pytest.approx(2.0, abs=1e-6)

    def test_camera_observations_within_fov(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            angle = rng.uniform(-math.pi, math.pi)
            pos = Vec2(3.0 * math.cos(angle), 3.0 * math.sin(angle))
            world = make_world([pos])
            obs = observe(world, DEFAULT_CAMERA, TINY, TINY,
                          np.random.default_rng(1))
            bearing = abs((angle - math.pi / 2 + math.pi) % (2 * math.pi) - math.pi)
            if bearing > math.radians(120):
                assert obs == []
            elif obs and obs[0].source == "camera":
                assert bearing < DEFAULT_CAMERA.fov_horizontal / 2

    def test_sampler_calibration(self):
        # 1e5 draws: per-axis mean within 3 stderr of 0, std within 3
        # stderr of sigma_p(d)
        d = 3.0
        model = SigmaModel("affine", (0.06, 0.02))
        sigma = eval_sigma(model, d)
        world = make_world([Vec2(0.0, d)])
        rng = np.random.default_rng(42)
        n = 100_000
        errs = np.empty((n, 2))
        for i in range(n):
            ob = observe(world, DEFAULT_CAMERA, model, TINY, rng)[0]
            errs[i] = (ob.mean_position.x, ob.mean_position.y - d)
        se_mean = sigma / math.sqrt(n)
        se_std = sigma / math.sqrt(2 * n)
        for axis in range(2):
            assert abs(errs[:, axis].mean()) < 3 * se_mean
            assert abs(errs[:, axis].std(ddof=1) - sigma) < 3 * se_std

    def test_noise_state_preserves_marginal(self):
        # AR(1) memory must not change the per-frame marginal
        d = 2.0
        model = SigmaModel("affine", (0.06, 0.02))
        sigma = eval_sigma(model, d)
        world = make_world([Vec2(0.0, d)])
        rng = np.random.default_rng(9)
        state = NoiseState(0.9)
        n = 50_000
        xs = np.empty(n)
        for i in range(n):
            ob = observe(world, DEFAULT_CAMERA, model, TINY, rng,
                         noise_state=state)[0]
            xs[i] = ob.mean_position.x
        # AR(1) shrinks the effective sample size by (1+a)/(1-a) = 19
        se = sigma / math.sqrt(n / 19.0)
        assert abs(xs.mean()) < 4 * se
        assert xs.std(ddof=1) == pytest.approx(sigma, rel=0.05)


class TestEstimateVelocity:
    def test_lateral_motion(self):
        # (1 - 1.1)/0.1 = -1 m/s lateral
        v = estimate_velocity((1.0, 0.5, 2.0), (1.1, 0.5, 2.0), 0.1, 0.0,
                              Vec2(0.0, 0.0))
        assert v.x == pytest.approx(-1.0)
        assert v.y == pytest.approx(0.0)

    def test_static_point_moving_robot(self):
        v = estimate_velocity((1.0, 0.0, 2.0), (1.0, 0.0, 2.0), 0.1, 0.0,
                              Vec2(0.5, 0.0))
        assert v.x == pytest.approx(0.5) and v.y == pytest.approx(0.0)

    def test_rejects_bad_timestamps(self):
        with pytest.raises(ValueError):
            estimate_velocity((0, 0, 1), (0, 0, 1), 1.0, 1.0, Vec2(0, 0))

    def test_constant_velocity_exact_through_projection(self):
        # walk a point at 1.2 m/s laterally; project/backproject each frame
        from ccvo.geometry import backproject_pixel
        speed, dt = 1.2, 0.1
        p0 = (0.4, 0.1, 3.0)
        p1 = (p0[0] + speed * dt, p0[1], p0[2])
        fix0 = backproject_pixel(DEFAULT_CAMERA, *project_point(DEFAULT_CAMERA, p0))
        fix1 = backproject_pixel(DEFAULT_CAMERA, *project_point(DEFAULT_CAMERA, p1))
        v = estimate_velocity(fix1, fix0, dt, 0.0, Vec2(0.0, 0.0))
        assert v.norm() == pytest.approx(speed, abs=1e-9)


class TestMaskedCentroid:
    def test_two_pixel_mean(self):
        mask = np.zeros((32, 32), dtype=bool)
        depth = np.full((32, 32), np.inf)
        mask[10, 10] = True
        depth[10, 10] = 2.0
        mask[10, 12] = True
        depth[10, 12] = 4.0
        px, py, d = masked_centroid(SegmentationMask(mask), depth)
        assert (px, py, d) == (11.0, 10.0, 3.0)

    def test_single_pixel(self):
        mask = np.zeros((8, 8), dtype=bool)
        depth = np.zeros((8, 8))
        mask[3, 5] = True
        depth[3, 5] = 1.5
        assert masked_centroid(SegmentationMask(mask), depth) == (5.0, 3.0, 1.5)

    def test_empty_mask_raises(self):
        mask = SegmentationMask(np.zeros((8, 8), dtype=bool))
        with pytest.raises(ValueError):
            masked_centroid(mask, np.zeros((8, 8)))

    def test_rasterized_disc_centroid(self):
        # centroid depth within one radius of the true center depth
        center, radius = (0.3, 0.0, 4.0), 0.35
        mask, depth = render_disc(DEFAULT_CAMERA, center, radius)
        _, _, d = masked_centroid(mask, depth)
        assert abs(d - center[2]) < radius


class TestSyntheticFrames:
    def test_two_frame_speed_recovery(self):
        # lateral 1.2 m/s; analytic flow; full centroid chain
        dt, speed = 0.1, 1.2
        center1 = (0.2, 0.0, 3.5)
        translation = (speed * dt, 0.0, 0.0)
        center0 = (center1[0] - translation[0], center1[1], center1[2])
        radius = 0.3
        mask1, depth1 = render_disc(DEFAULT_CAMERA, center1, radius)
        _, depth0 = render_disc(DEFAULT_CAMERA, center0, radius)
        flow = flow_from_translation(DEFAULT_CAMERA, mask1, depth1, translation)
        _, vel = estimate_from_frames(DEFAULT_CAMERA, mask1, depth1, depth0,
                                      flow, dt, 0.0, Vec2(0.0, 0.0))
        # surface sampling and pixel rounding shift the centroid slightly;
        # the error stays well under the object radius
        assert vel.x == pytest.approx(speed, abs=0.15)
        assert abs(vel.y) < 0.15


class TestErrorPropagation:
    def test_flow_error_worked_example(self):
        # 4.09 px * 2 m / 457 px = 0.0179 m (rounds to 0.02 m)
        err = flow_displacement_error(4.09, 2.0, 457.0)
        assert err == pytest.approx(0.0179, abs=5e-5)

    def test_zero_flow_error(self):
        assert flow_displacement_error(0.0, 2.0, 457.0) == 0.0

    def test_proportionality(self):
        assert flow_displacement_error(4.57, 1.0, 457.0) == pytest.approx(0.01)

    def test_inflate_radius(self):
        assert inflate_radius(0.3) == pytest.approx(0.45)
        assert inflate_radius(0.3, 1.0) == pytest.approx(0.3)
        assert inflate_radius(0.2, 2.0) == pytest.approx(0.4)
        with pytest.raises(ValueError):
            inflate_radius(0.3, 0.9)


class TestObservationInvariants:
    def test_camera_requires_velocity(self):
        with pytest.raises(ValueError):
            ObstacleObservation(Vec2(0, 1), None, 0.1, None, 0.3,
                                "camera", 1.0)

    def test_lidar_only_forbids_velocity(self):
        with pytest.raises(ValueError):
            ObstacleObservation(Vec2(0, 1), Vec2(0, 0), 0.1, 0.1, 0.3,
                                "lidar_only", 1.0)
