"""Velocity selection over the sampled reachable set.

Each planning step builds a polar grid of world-frame candidate velocities
limited to what the drive can reach in one step, intersects the active
constraint families, and picks the feasible sample nearest the preferred
velocity. Constraint families:

  kinematic: speed cap, per-step heading change cap, forward-only motion.
  camera-fov: candidate headings that keep the next step inside the
      camera's field of view (guards against unseen robot-like agents).
  chance: probabilistic velocity-obstacle test per camera observation.
  unknown-velocity: worst-case clearance per Lidar-only observation,
      assuming it may move at pedestrian speed in any direction.

`feasible_count` reports the size of the probabilistic feasible region
(kinematic grid intersected with the chance family only); this is the
region the fixed-noise baseline enlarges and is what conservatism
comparisons between the planners are made on. Selection always honors all
four families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chance import (DEFAULT_N_TAU, chance_feasible_mask,
                     is_feasible_chance, worst_case_clearance_mask)
from .geometry import Pose2, Vec2, robot_frame_components, wrap_angle
from .perception import (DEFAULT_LIDAR_RANGE, DEFAULT_POSITION_SIGMA,
                         DEFAULT_VELOCITY_SIGMA, ObstacleObservation,
                         conservative_sigma)

DEFAULT_ROBOT_RADIUS = 0.2        # m, Turtlebot-scale
DEFAULT_CAMERA_FOV = math.radians(70.0)
AVERAGE_PEDESTRIAN_SPEED = 1.5    # m/s
# r_r + inflated default pedestrian radius (0.2 + 0.45)
DEFAULT_COLLISION_THRESHOLD = 0.65  # m


@dataclass(frozen=True)
class KinematicLimits:
    v_max: float = 0.5        # m/s
    omega_max: float = 3.0    # rad/s
    forward_only: bool = True
    dt: float = 0.1           # s, control period

    def __post_init__(self):
        if self.v_max <= 0 or self.omega_max <= 0 or self.dt <= 0:
            raise ValueError("kinematic limits must be positive")


@dataclass(frozen=True)
class PlannerConfig:
    k: float = 1.0                     # Cantelli confidence parameter
    horizon_T: float = 2.5             # s, velocity-obstacle lookahead
    n_tau: int = DEFAULT_N_TAU
    collision_threshold_C: float = DEFAULT_COLLISION_THRESHOLD
    camera_fov: float = DEFAULT_CAMERA_FOV
    assumed_ped_speed: float = AVERAGE_PEDESTRIAN_SPEED
    preferred_speed: float = 0.45      # m/s
    grid_speeds: int = 8
    grid_headings: int = 21
    robot_radius: float = DEFAULT_ROBOT_RADIUS
    # Lookahead for unknown-velocity (Lidar-only) obstacles. This is a
    # per-step clearance window, much shorter than horizon_T: the worst
    # case over headings at pedestrian speed empties the whole reachable
    # set when integrated over the full horizon, freezing the robot.
    unknown_horizon: float = 0.45      # s
    # Unknown-velocity obstacles behind the robot are exempt (the model
    # assumes nothing deliberately runs into the robot from behind);
    # without this, anything already passed pins the robot in place.
    unknown_front_only: bool = True
    enforce_camera_fov: bool = True
    # Fixed sigmas for the conservative baseline planner (worst sigma over
    # the sensing range, ignoring the distance dependence).
    baseline_sigma_p: float = field(
        default=conservative_sigma(DEFAULT_POSITION_SIGMA, DEFAULT_LIDAR_RANGE))
    baseline_sigma_v: float = field(
        default=conservative_sigma(DEFAULT_VELOCITY_SIGMA, DEFAULT_LIDAR_RANGE))

    def __post_init__(self):
        if min(self.k, self.horizon_T, self.collision_threshold_C,
               self.assumed_ped_speed, self.preferred_speed,
               self.robot_radius, self.unknown_horizon) <= 0:
            raise ValueError("planner parameters must be positive")
        if not 0 < self.camera_fov < 2 * math.pi:
            raise ValueError("camera_fov must lie in (0, 2*pi)")
        if self.grid_speeds < 2 or self.grid_headings < 2:
            raise ValueError("grid counts must be at least 2")
        if self.n_tau < 1:
            raise ValueError("n_tau must be at least 1")


@dataclass(frozen=True)
class VelocityGrid:
    """Candidate velocities with per-family feasibility flags."""

    velocities: np.ndarray       # (N, 2) world frame
    kinematic: np.ndarray        # (N,) bool
    camera_fov: np.ndarray       # (N,) bool
    chance: np.ndarray           # (N,) bool, all camera observations
    unknown: np.ndarray          # (N,) bool, all lidar-only observations


@dataclass(frozen=True)
class PlanResult:
    chosen_velocity: Vec2
    command: tuple[float, float]  # (linear m/s, angular rad/s)
    feasible_count: int
    status: str                   # "ok" | "stuck"
    grid: VelocityGrid


def fov_constraint(v: Vec2, fov: float) -> bool:
    """True iff a robot-frame velocity keeps its heading inside the FOV cone.

    v is given as (lateral, forward) robot-frame components packed in a
    Vec2 (x lateral, y forward); the zero velocity is always allowed.
    """
    if not 0 < fov < 2 * math.pi:
        raise ValueError("fov must lie in (0, 2*pi)")
    if v.x == 0.0 and v.y == 0.0:
        return True
    return abs(math.atan2(v.x, v.y)) < fov / 2.0


def lidar_ped_constraint(v: Vec2, p_o: Vec2, ped_speed: float, C: float,
                         horizon_T: float, n_tau: int = DEFAULT_N_TAU) -> bool:
    """Worst-case clearance against an obstacle of unknown heading.

    The obstacle at relative position p_o may move at ped_speed in any
    direction; feasibility requires ||v*tau - p_o|| - ped_speed*tau > C at
    every grid lookahead. This is the closed-form worst case over the
    direction of the obstacle velocity.
    """
    if p_o.norm() <= C:
        raise ValueError("already within the collision threshold")
    mask = worst_case_clearance_mask(
        np.array([[v.x, v.y]]), p_o, ped_speed, C, horizon_T, n_tau)
    return bool(mask[0])


def kinematic_feasible(v: Vec2, pose: Pose2, limits: KinematicLimits) -> bool:
    """Membership in the one-step reachable set of the differential drive."""
    speed = v.norm()
    if speed == 0.0:
        return True
    if speed > limits.v_max + 1e-12:
        return False
    turn = abs(wrap_angle(v.heading() - pose.heading))
    if turn > limits.omega_max * limits.dt + 1e-12:
        return False
    if limits.forward_only:
        _, fwd = robot_frame_components(v, pose.heading)
        if fwd < 0.0:
            return False
    return True


def preferred_velocity(pose: Pose2, goal: Vec2, preferred_speed: float,
                       dt: float = 0.1) -> Vec2:
    """Velocity toward the goal at cruise speed, clamped near arrival."""
    to_goal = goal - pose.position
    dist = to_goal.norm()
    if dist == 0.0:
        return Vec2(0.0, 0.0)
    speed = min(preferred_speed, dist / dt)
    return to_goal * (speed / dist)


def to_command(v: Vec2, pose: Pose2,
               limits: KinematicLimits) -> tuple[float, float]:
    """Convert a feasible world velocity to a (linear, angular) command."""
    if not kinematic_feasible(v, pose, limits):
        raise ValueError("velocity violates the kinematic limits")
    speed = v.norm()
    if speed == 0.0:
        return (0.0, 0.0)
    turn = wrap_angle(v.heading() - pose.heading)
    angular = max(-limits.omega_max, min(limits.omega_max, turn / limits.dt))
    return (speed, angular)


def _build_grid(pose: Pose2, limits: KinematicLimits,
                config: PlannerConfig) -> np.ndarray:
    """Polar sample set over [0, v_max] x [heading +- omega_max*dt]."""
    speeds = np.linspace(0.0, limits.v_max, config.grid_speeds)[1:]
    half_window = limits.omega_max * limits.dt
    headings = pose.heading + np.linspace(-half_window, half_window,
                                          config.grid_headings)
    vx = np.outer(speeds, np.cos(headings)).ravel()
    vy = np.outer(speeds, np.sin(headings)).ravel()
    grid = np.column_stack([vx, vy])
    return np.vstack([[0.0, 0.0], grid])


def _fov_mask(velocities: np.ndarray, heading: float, fov: float) -> np.ndarray:
    fwd = velocities[:, 0] * math.cos(heading) + velocities[:, 1] * math.sin(heading)
    lat = velocities[:, 0] * math.sin(heading) - velocities[:, 1] * math.cos(heading)
    mask = np.abs(np.arctan2(lat, fwd)) < fov / 2.0
    mask[np.hypot(velocities[:, 0], velocities[:, 1]) == 0.0] = True
    return mask


def _select(velocities: np.ndarray, feasible: np.ndarray, v_pref: Vec2,
            heading: float) -> int | None:
    """Nearest-to-preferred selection with deterministic tie-breaking.

    Ties on the distance to v_pref go to the smaller heading deviation
    from the current heading, then to the smaller speed.
    """
    idx = np.nonzero(feasible)[0]
    if idx.size == 0:
        return None
    cand = velocities[idx]
    dist = np.hypot(cand[:, 0] - v_pref.x, cand[:, 1] - v_pref.y)
    speeds = np.hypot(cand[:, 0], cand[:, 1])
    dev = np.abs([wrap_angle(math.atan2(vy, vx) - heading) if s > 0 else 0.0
                  for (vx, vy), s in zip(cand, speeds)])
    order = np.lexsort((speeds, dev, np.round(dist / 1e-12) * 1e-12))
    return int(idx[order[0]])


def _unknown_exempt(obs: ObstacleObservation, pose: Pose2,
                    config: PlannerConfig) -> bool:
    """True if a Lidar-only obstacle sits in the exempt rear half-plane."""
    if not config.unknown_front_only:
        return False
    _, fwd = robot_frame_components(obs.mean_position, pose.heading)
    return fwd < 0.0


def _evaluate_grid(velocities: np.ndarray, pose: Pose2,
                   observations: list[ObstacleObservation],
                   config: PlannerConfig, limits: KinematicLimits,
                   conservative: bool) -> VelocityGrid:
    n = velocities.shape[0]
    kin = np.array([kinematic_feasible(Vec2(vx, vy), pose, limits)
                    for vx, vy in velocities])
    if conservative or not config.enforce_camera_fov:
        fov = np.ones(n, dtype=bool)
    else:
        fov = _fov_mask(velocities, pose.heading, config.camera_fov)

    chance = np.ones(n, dtype=bool)
    unknown = np.ones(n, dtype=bool)
    for obs in observations:
        r_sum = config.robot_radius + obs.radius
        if conservative:
            # Fixed worst-case sigmas; Lidar-only obstacles are pinned
            # static, and a pinned obstacle has no velocity uncertainty.
            vel = obs.mean_velocity or Vec2(0.0, 0.0)
            sigma_v = (config.baseline_sigma_v
                       if obs.mean_velocity is not None else 0.0)
            chance &= chance_feasible_mask(
                velocities, obs.mean_position, vel,
                config.baseline_sigma_p, sigma_v,
                r_sum, config.k, config.horizon_T, config.n_tau)
        elif obs.source == "camera":
            chance &= chance_feasible_mask(
                velocities, obs.mean_position, obs.mean_velocity,
                obs.sigma_p, obs.sigma_v,
                r_sum, config.k, config.horizon_T, config.n_tau)
        else:
            if _unknown_exempt(obs, pose, config):
                continue
            if obs.mean_position.norm() <= config.collision_threshold_C:
                unknown &= False
            else:
                unknown &= worst_case_clearance_mask(
                    velocities, obs.mean_position, config.assumed_ped_speed,
                    config.collision_threshold_C, config.unknown_horizon,
                    config.n_tau)
    return VelocityGrid(velocities, kin, fov, chance, unknown)


def _feasible_mask(grid: VelocityGrid) -> np.ndarray:
    return grid.kinematic & grid.camera_fov & grid.chance & grid.unknown


def _stuck_rotation(observations: list[ObstacleObservation], pose: Pose2,
                    config: PlannerConfig, limits: KinematicLimits,
                    conservative: bool) -> float:
    """Angular rate while translation is blocked.

    The platform can always rotate in place, so instead of deadlocking at
    a fixed heading we turn toward whichever side would free more of the
    next step's velocity window.
    """
    turn = limits.omega_max * limits.dt
    counts = []
    for sign in (-1.0, 1.0):
        rotated = Pose2(pose.position, pose.heading + sign * turn)
        velocities = _build_grid(rotated, limits, config)
        grid = _evaluate_grid(velocities, rotated, observations, config,
                              limits, conservative)
        counts.append(int(np.count_nonzero(_feasible_mask(grid))))
    if counts[1] > counts[0]:
        return limits.omega_max
    if counts[0] > counts[1]:
        return -limits.omega_max
    # Deep deadlock. If an unidentified (Lidar-only) obstacle is pinning
    # us, scan toward it: once inside the camera cone its velocity is
    # known and the probabilistic test replaces the worst-case one.
    # Otherwise turn away from the nearest known threat. Both bearings
    # vary slowly while pinned, so the turn direction is stable.
    unknown = [obs.mean_position for obs in observations
               if obs.mean_velocity is None]
    if unknown:
        nearest = min(unknown, key=lambda p: p.norm())
        bearing = wrap_angle(nearest.heading() - pose.heading)
        return limits.omega_max if bearing >= 0.0 else -limits.omega_max
    known = [obs.mean_position for obs in observations
             if obs.mean_velocity is not None]
    if not known:
        return limits.omega_max
    nearest = min(known, key=lambda p: p.norm())
    bearing = wrap_angle(nearest.heading() - pose.heading)
    return -limits.omega_max if bearing >= 0.0 else limits.omega_max


def _plan(observations: list[ObstacleObservation], pose: Pose2, goal: Vec2,
          config: PlannerConfig, limits: KinematicLimits,
          conservative: bool) -> PlanResult:
    velocities = _build_grid(pose, limits, config)
    grid = _evaluate_grid(velocities, pose, observations, config, limits,
                          conservative)
    v_pref = preferred_velocity(pose, goal, config.preferred_speed, limits.dt)
    feasible = _feasible_mask(grid)
    count = int(np.count_nonzero(grid.kinematic & grid.chance))
    choice = _select(velocities, feasible, v_pref, pose.heading)
    if choice is None:
        omega = _stuck_rotation(observations, pose, config, limits,
                                conservative)
        return PlanResult(Vec2(0.0, 0.0), (0.0, omega), count, "stuck", grid)
    chosen = Vec2(float(velocities[choice, 0]), float(velocities[choice, 1]))
    command = to_command(chosen, pose, limits)
    if chosen.norm() == 0.0 and v_pref.norm() > 0.0:
        # Parked (every reachable heading points away from the preferred
        # velocity): re-aim in place so progress can resume, instead of
        # pinning the heading forever.
        turn = wrap_angle(v_pref.heading() - pose.heading)
        omega = max(-limits.omega_max, min(limits.omega_max, turn / limits.dt))
        command = (0.0, omega)
    return PlanResult(chosen, command, count, "ok", grid)


def plan(observations: list[ObstacleObservation], pose: Pose2,
         robot_velocity: Vec2, goal: Vec2, config: PlannerConfig,
         limits: KinematicLimits) -> PlanResult:
    """One planning step of the distance-aware chance-constrained planner.

    Camera observations are screened with the probabilistic velocity
    obstacle at their own detection sigmas; Lidar-only observations are
    screened with the worst-case unknown-velocity clearance; the camera
    FOV cone restricts candidate headings when enabled. Among the samples
    passing every family, the one nearest the preferred velocity wins.
    With an empty feasible set the result is status "stuck": translation
    stops and the platform rotates in place toward whichever heading
    frees the most options, until replanning finds a way out.
    """
    return _plan(observations, pose, goal, config, limits, conservative=False)


def plan_prvo_baseline(observations: list[ObstacleObservation], pose: Pose2,
                       robot_velocity: Vec2, goal: Vec2,
                       config: PlannerConfig,
                       limits: KinematicLimits) -> PlanResult:
    """Conservative fixed-noise baseline, blind to partial observation.

    Differences from `plan`: Lidar-only obstacles are treated as static
    discs under the same probabilistic test, the camera FOV cone is not
    enforced, and all chance tests run at the fixed worst-case sigmas
    instead of the distance-dependent ones. The enlarged noise makes its
    probabilistic feasible region a subset of the main planner's (for
    k >= 1), while ignoring that unseen obstacles may be moving.
    """
    return _plan(observations, pose, goal, config, limits, conservative=True)


def recheck_plan(result: PlanResult, observations: list[ObstacleObservation],
                 pose: Pose2, config: PlannerConfig,
                 limits: KinematicLimits) -> bool:
    """Re-evaluate every scalar constraint predicate on the chosen velocity.

    Used by soundness tests: an "ok" plan must pass all of these.
    """
    v = result.chosen_velocity
    if not kinematic_feasible(v, pose, limits):
        return False
    if config.enforce_camera_fov:
        lat, fwd = robot_frame_components(v, pose.heading)
        if not fov_constraint(Vec2(lat, fwd), config.camera_fov):
            return False
    for obs in observations:
        r_sum = config.robot_radius + obs.radius
        if obs.source == "camera":
            if not is_feasible_chance(obs, v, r_sum, config.k,
                                      config.horizon_T, config.n_tau):
                return False
        else:
            if _unknown_exempt(obs, pose, config):
                continue
            if obs.mean_position.norm() <= config.collision_threshold_C:
                return False
            if not lidar_ped_constraint(v, obs.mean_position,
                                        config.assumed_ped_speed,
                                        config.collision_threshold_C,
                                        config.unknown_horizon, config.n_tau):
                return False
    return True
