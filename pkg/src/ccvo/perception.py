"""Distance-dependent Gaussian observation model and the estimation pipeline.

Two modes are provided:

  * noise injection: sample obstacle positions/velocities from isotropic
    Gaussians whose sigmas depend on the detection distance. This is what
    the planner benchmarks consume.
  * synthetic frames: rasterize disc obstacles into depth images, derive
    optical flow analytically from the ground-truth motion, and run the
    masked-centroid -> backprojection -> finite-difference velocity chain.
    Used to validate the estimation geometry; no neural networks involved.

Observation positions are robot-centered but world-axis-aligned so they can
be combined directly with world-frame velocities downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import (DiscBody, PinholeCamera, Pose2, Vec2,
                       bearing_from_heading, project_point, wrap_angle)

SIGMA_FORMS = ("constant", "affine", "reciprocal_affine")

# Pedestrian-scale defaults when the camera cannot size an obstacle.
DEFAULT_PEDESTRIAN_RADIUS = 0.3  # m
DEFAULT_RADIUS_INFLATION = 1.5   # bounding boxes of movers are grown >= 50%

DEFAULT_LIDAR_FOV = math.radians(240.0)
DEFAULT_LIDAR_RANGE = 8.0  # m


@dataclass(frozen=True)
class SigmaModel:
    """Sigma as a function of detection distance d, floored away from zero.

    Forms:
      constant:          sigma(d) = a
      affine:            sigma(d) = a + b*d
      reciprocal_affine: sigma(d) = a + b/d

    Every form is monotone in d, so both the "errors grow with distance"
    and the "errors shrink with distance" regimes can be configured.
    """

    form: str
    params: tuple[float, ...]
    floor: float = 1e-3

    def __post_init__(self):
        if self.form not in SIGMA_FORMS:
            raise ValueError(f"unknown sigma form {self.form!r}")
        if self.floor <= 0:
            raise ValueError("sigma floor must be positive")
        n_expected = 1 if self.form == "constant" else 2
        if len(self.params) != n_expected:
            raise ValueError(f"form {self.form!r} takes {n_expected} params")


DEFAULT_POSITION_SIGMA = SigmaModel("affine", (0.06, 0.02))
DEFAULT_VELOCITY_SIGMA = SigmaModel("affine", (0.05, 0.04))


def eval_sigma(model: SigmaModel, d: float) -> float:
    """Evaluate a sigma model at distance d > 0 (result >= floor)."""
    if d <= 0:
        raise ValueError(f"distance must be positive, got {d}")
    if model.form == "constant":
        value = model.params[0]
    elif model.form == "affine":
        value = model.params[0] + model.params[1] * d
    else:  # reciprocal_affine
        value = model.params[0] + model.params[1] / d
    return max(value, model.floor)


def conservative_sigma(model: SigmaModel, max_range: float,
                       d_min: float = 0.1, n_grid: int = 256) -> float:
    """Largest sigma the model takes over the sensing range [d_min, max_range].

    Used by the fixed-noise baseline planner, which ignores the distance
    dependence and assumes the worst sigma everywhere.
    """
    grid = np.linspace(d_min, max_range, n_grid)
    return max(eval_sigma(model, float(d)) for d in grid)


@dataclass(frozen=True)
class ObstacleObservation:
    """One detected obstacle.

    mean_position is relative to the robot, world-axis-aligned (meters);
    mean_velocity is absolute, world frame (m/s). Camera-sourced detections
    carry a velocity estimate; Lidar-only detections do not.
    """

    mean_position: Vec2
    mean_velocity: Optional[Vec2]
    sigma_p: float
    sigma_v: Optional[float]
    radius: float
    source: str  # "camera" | "lidar_only"
    distance_at_detection: float

    def __post_init__(self):
        if self.sigma_p <= 0:
            raise ValueError("sigma_p must be positive")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.source == "camera":
            if self.mean_velocity is None or self.sigma_v is None:
                raise ValueError("camera observations carry a velocity")
        elif self.source == "lidar_only":
            if self.mean_velocity is not None or self.sigma_v is not None:
                raise ValueError("lidar-only observations carry no velocity")
        else:
            raise ValueError(f"unknown source {self.source!r}")


@dataclass(frozen=True)
class SegmentationMask:
    bitmap: np.ndarray  # (height, width) booleans

    def __post_init__(self):
        if self.bitmap.ndim != 2 or self.bitmap.dtype != bool:
            raise ValueError("mask must be a 2D boolean array")


def flow_displacement_error(e_f: float, z: float, f: float) -> float:
    """Metric displacement error caused by a flow error of e_f pixels.

    A flow endpoint error of e_f pixels on an object at depth z seen
    through focal length f corresponds to e_f*z/f meters.
    """
    if f <= 0 or z <= 0:
        raise ValueError("focal length and depth must be positive")
    return e_f * z / f


def inflate_radius(r: float, factor: float = DEFAULT_RADIUS_INFLATION) -> float:
    """Grow an estimated obstacle radius by a safety factor >= 1."""
    if r <= 0:
        raise ValueError("radius must be positive")
    if factor < 1.0:
        raise ValueError(f"inflation factor must be >= 1, got {factor}")
    return r * factor


def masked_centroid(mask: SegmentationMask,
                    depth: np.ndarray) -> tuple[float, float, float]:
    """Uniform-weight centroid (px, py) and mean depth over the masked pixels.

    Masked pixels with non-finite depth are ignored; an effectively empty
    mask raises.
    """
    if depth.shape != mask.bitmap.shape:
        raise ValueError("depth image and mask dimensions differ")
    rows, cols = np.nonzero(mask.bitmap)
    if rows.size:
        valid = np.isfinite(depth[rows, cols])
        rows, cols = rows[valid], cols[valid]
    if not rows.size:
        raise ValueError("no detection: mask has no finite-depth pixel")
    d = float(depth[rows, cols].mean())
    return (float(cols.mean()), float(rows.mean()), d)


def estimate_velocity(p1: tuple[float, float, float],
                      p0: tuple[float, float, float],
                      t1: float, t0: float,
                      robot_velocity: Vec2) -> Vec2:
    """Absolute planar velocity from two camera-frame 3D fixes.

    The relative velocity is the planar part of (p1 - p0)/(t1 - t0); camera
    x maps to lateral, camera z to forward (see geometry conventions). The
    robot's own planar velocity, expressed in the same axes, is added back.
    """
    if t1 <= t0:
        raise ValueError(f"need t1 > t0, got t1={t1}, t0={t0}")
    dt = t1 - t0
    rel = Vec2((p1[0] - p0[0]) / dt, (p1[2] - p0[2]) / dt)
    return rel + robot_velocity


# ---------------------------------------------------------------------------
# Noise-injection observation model
# ---------------------------------------------------------------------------

def _segment_blocked(rel_target: Vec2, dist: float, rel_other: Vec2,
                     other_radius: float) -> bool:
    """True if the disc at rel_other occludes the sight line to rel_target."""
    # Closest approach of the segment origin->rel_target to the disc center.
    t = (rel_other.dot(rel_target)) / (dist * dist)
    if t <= 0.0 or t >= 1.0:
        return False
    closest = rel_target * t
    return (closest - rel_other).norm() < other_radius


class NoiseState:
    """AR(1) memory for per-obstacle observation errors.

    Real perception errors persist across consecutive frames instead of
    redrawing independently at the sensor rate. Each obstacle keeps a
    standardized residual z that evolves as

        z' = correlation * z + sqrt(1 - correlation^2) * fresh,

    so the per-frame marginal is exactly N(0, sigma(d)^2) while errors
    decorrelate over ~1/(1-correlation) frames. With correlation 0 this
    reduces to independent per-frame noise.
    """

    def __init__(self, correlation: float = 0.9):
        if not 0.0 <= correlation < 1.0:
            raise ValueError("correlation must lie in [0, 1)")
        self.correlation = correlation
        self._z: dict[int, np.ndarray] = {}

    def standardized(self, key: int, rng: np.random.Generator) -> np.ndarray:
        fresh = rng.standard_normal(4)
        prev = self._z.get(key)
        if prev is None:
            z = fresh
        else:
            a = self.correlation
            z = a * prev + math.sqrt(1.0 - a * a) * fresh
        self._z[key] = z
        return z


def observe(world, camera: PinholeCamera,
            position_sigma: SigmaModel, velocity_sigma: SigmaModel,
            rng: np.random.Generator,
            lidar_fov: float = DEFAULT_LIDAR_FOV,
            lidar_range: float = DEFAULT_LIDAR_RANGE,
            default_radius: float = DEFAULT_PEDESTRIAN_RADIUS,
            radius_inflation: float = DEFAULT_RADIUS_INFLATION,
            noise_state: Optional[NoiseState] = None,
            ) -> list[ObstacleObservation]:
    """Sample one noisy observation set from the ground-truth world.

    Every obstacle inside the Lidar field of view and range, and not
    occluded by a nearer obstacle, yields one observation. Obstacles whose
    bearing also falls inside the camera FOV are camera-sourced (noisy
    position and velocity, true radius); the rest are Lidar-only (noisy
    position, no velocity, inflated default radius).

    Each call draws errors with per-frame marginal N(0, sigma(d)^2) per
    axis. Passing a NoiseState correlates the errors across calls (see
    NoiseState); without one they are independent.

    The generator must be exclusively owned by the caller.
    """
    robot_pos = world.robot.pose.position
    heading = world.robot.pose.heading

    bodies: list[tuple[Vec2, Optional[Vec2], float]] = []
    for ped in world.pedestrians:
        bodies.append((ped.position, ped.velocity, ped.radius))
    for disc in world.static_obstacles:
        bodies.append((disc.center, Vec2(0.0, 0.0), disc.radius))

    observations = []
    for i, (pos, vel, radius) in enumerate(bodies):
        rel = pos - robot_pos
        dist = rel.norm()
        if dist == 0.0 or dist > lidar_range:
            continue
        bearing = bearing_from_heading(rel, heading)
        if abs(bearing) > lidar_fov / 2.0:
            continue
        occluded = any(
            j != i and (other_pos - robot_pos).norm() < dist
            and _segment_blocked(rel, dist, other_pos - robot_pos, other_r)
            for j, (other_pos, _, other_r) in enumerate(bodies))
        if occluded:
            continue

        if noise_state is None:
            z = rng.standard_normal(4)
        else:
            z = noise_state.standardized(i, rng)
        sp = eval_sigma(position_sigma, dist)
        noisy_pos = Vec2(rel.x + sp * z[0], rel.y + sp * z[1])
        if abs(bearing) < camera.fov_horizontal / 2.0:
            sv = eval_sigma(velocity_sigma, dist)
            noisy_vel = Vec2(vel.x + sv * z[2], vel.y + sv * z[3])
            observations.append(ObstacleObservation(
                mean_position=noisy_pos, mean_velocity=noisy_vel,
                sigma_p=sp, sigma_v=sv, radius=radius,
                source="camera", distance_at_detection=dist))
        else:
            observations.append(ObstacleObservation(
                mean_position=noisy_pos, mean_velocity=None,
                sigma_p=sp, sigma_v=None,
                radius=inflate_radius(default_radius, radius_inflation),
                source="lidar_only", distance_at_detection=dist))
    return observations


# ---------------------------------------------------------------------------
# Synthetic-frame mode
# ---------------------------------------------------------------------------

def render_disc(camera: PinholeCamera, center: tuple[float, float, float],
                radius: float, half_height: float = 0.8,
                ) -> tuple[SegmentationMask, np.ndarray]:
    """Rasterize a vertical cylinder of given planar radius into a depth image.

    center is the camera-frame 3D position of the cylinder axis at
    mid-height. Depth along each intersecting pixel column is the exact
    ray/circle hit in the ground plane; background pixels are +inf.
    """
    cx3, cy3, cz3 = center
    if cz3 <= radius:
        raise ValueError("cylinder must be fully in front of the camera")
    depth = np.full((camera.height, camera.width), np.inf)
    mask = np.zeros((camera.height, camera.width), dtype=bool)

    us = np.arange(camera.width, dtype=float)
    # Planar ray through pixel column u: direction (dx, 1) in (x, z).
    dx = (us - camera.cx) / camera.fx
    # Solve |t*(dx,1) - (cx3,cz3)| = radius for the smaller positive t (in z).
    a = dx * dx + 1.0
    b = -2.0 * (dx * cx3 + cz3)
    c = cx3 * cx3 + cz3 * cz3 - radius * radius
    disc = b * b - 4.0 * a * c
    hit = disc >= 0.0
    z_hit = np.where(hit, (-b - np.sqrt(np.maximum(disc, 0.0))) / (2.0 * a),
                     np.inf)
    for u in np.nonzero(hit)[0]:
        z = z_hit[u]
        if not np.isfinite(z) or z <= 0:
            continue
        v_half = camera.fy * half_height / z
        v_lo = max(0, int(math.ceil(camera.cy + camera.fy * cy3 / z - v_half)))
        v_hi = min(camera.height - 1,
                   int(math.floor(camera.cy + camera.fy * cy3 / z + v_half)))
        if v_lo > v_hi:
            continue
        depth[v_lo:v_hi + 1, u] = z
        mask[v_lo:v_hi + 1, u] = True
    return SegmentationMask(mask), depth


def flow_from_translation(camera: PinholeCamera, mask: SegmentationMask,
                          depth: np.ndarray,
                          translation: tuple[float, float, float],
                          ) -> np.ndarray:
    """Analytic backward optical flow for a rigid camera-frame translation.

    For each masked pixel the 3D surface point is backprojected, moved by
    -translation (where it was one frame earlier), and reprojected; the flow
    is s0 - s1, so that s0 = s1 + flow. Unmasked pixels carry zero flow.
    """
    flow = np.zeros((camera.height, camera.width, 2))
    rows, cols = np.nonzero(mask.bitmap)
    tx, ty, tz = translation
    for v, u in zip(rows, cols):
        z = depth[v, u]
        x = (u - camera.cx) * z / camera.fx
        y = (v - camera.cy) * z / camera.fy
        u0, v0, _ = project_point(camera, (x - tx, y - ty, z - tz))
        flow[v, u, 0] = u0 - u
        flow[v, u, 1] = v0 - v
    return flow


def estimate_from_frames(camera: PinholeCamera, mask: SegmentationMask,
                         depth1: np.ndarray, depth0: np.ndarray,
                         flow: np.ndarray, t1: float, t0: float,
                         robot_velocity: Vec2,
                         ) -> tuple[tuple[float, float, float], Vec2]:
    """Run the two-frame estimation chain on synthetic images.

    Current-frame pixels are warped back through the flow; correspondences
    that leave the frame or hit background depth are dropped. Returns the
    current-frame 3D fix and the absolute planar velocity estimate.
    """
    from .geometry import backproject_pixel, flow_warp

    u1, v1, d1 = masked_centroid(mask, depth1)
    p1 = backproject_pixel(camera, u1, v1, d1)

    rows, cols = np.nonzero(mask.bitmap)
    s0_us, s0_vs, d0s = [], [], []
    for v, u in zip(rows, cols):
        if not np.isfinite(depth1[v, u]):
            continue
        u0, v0 = flow_warp((float(u), float(v)), tuple(flow[v, u]))
        iu, iv = int(round(u0)), int(round(v0))
        if not (0 <= iu < camera.width and 0 <= iv < camera.height):
            continue  # missing correspondence, not clamped
        if not np.isfinite(depth0[iv, iu]):
            continue
        s0_us.append(u0)
        s0_vs.append(v0)
        d0s.append(depth0[iv, iu])
    if not d0s:
        raise ValueError("no usable correspondences in the previous frame")
    p0 = backproject_pixel(camera, float(np.mean(s0_us)),
                           float(np.mean(s0_vs)), float(np.mean(d0s)))
    velocity = estimate_velocity(p1, p0, t1, t0, robot_velocity)
    return p1, velocity
