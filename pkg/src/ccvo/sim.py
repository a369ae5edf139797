"""Ground-truth 2D world, pedestrian models, scenarios, episode loop."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .geometry import DEFAULT_CAMERA, DiscBody, PinholeCamera, Pose2, Vec2
from .perception import (DEFAULT_LIDAR_FOV, DEFAULT_LIDAR_RANGE,
                         DEFAULT_POSITION_SIGMA, DEFAULT_VELOCITY_SIGMA,
                         NoiseState, SigmaModel, observe)
from .planner import (DEFAULT_ROBOT_RADIUS, KinematicLimits, PlannerConfig,
                      plan, plan_prvo_baseline)

SCENARIO_NAMES = ("empty", "static", "dynamic", "cross", "social")
PLANNER_KINDS = ("ccvo", "baseline")

GOAL_TOLERANCE = 0.3        # m
MAX_SPEED_MULTIPLIER = 1.3  # pedestrian clamp relative to nominal speed
PED_GOAL_TOLERANCE = 0.2    # m, pedestrians stop here


@dataclass(frozen=True)
class PedestrianModel:
    kind: str = "straight"   # static | straight | crossing | social_force
    speed: float = 1.2       # m/s nominal
    goal: Vec2 = Vec2(0.0, 0.0)
    repulsion_gain: float = 1.0    # m/s, social_force only
    repulsion_range: float = 0.4   # m, social_force only

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError("pedestrian speed cannot be negative")


@dataclass(frozen=True)
class Pedestrian:
    position: Vec2
    velocity: Vec2
    radius: float
    model: PedestrianModel


@dataclass(frozen=True)
class RobotState:
    pose: Pose2
    velocity: Vec2
    radius: float = DEFAULT_ROBOT_RADIUS


@dataclass(frozen=True)
class WorldState:
    robot: RobotState
    pedestrians: tuple[Pedestrian, ...]
    static_obstacles: tuple[DiscBody, ...]
    time: float
    bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    start: Vec2
    goal: Vec2
    time_limit: float

    def __post_init__(self):
        if (self.start - self.goal).norm() == 0.0:
            raise ValueError("start and goal must differ")
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")


@dataclass(frozen=True)
class ScenarioParams:
    """Tunable scenario generation knobs (counts/speeds are not dictated by
    the benchmark definitions, so they live here with documented defaults)."""

    bounds: tuple[float, float, float, float] = (-8.0, -8.0, 8.0, 8.0)
    time_limit: float = 150.0
    # Static disc radii stay at or below the inflated pedestrian default,
    # so the unknown-velocity threshold also covers unsized flank passes.
    n_static: int = 7
    static_radius: tuple[float, float] = (0.3, 0.45)
    static_gap: float = 3.0
    n_pedestrians: int = 5
    n_cross: int = 10
    ped_radius: float = 0.3
    ped_speed: tuple[float, float] = (0.3, 0.6)
    cross_speed: tuple[float, float] = (0.6, 1.6)


@dataclass(frozen=True)
class EpisodeResult:
    outcome: str                     # success | collision | timeout
    trajectory_length: float         # m
    navigation_time: float           # s
    trajectory: tuple[tuple[float, Pose2], ...]
    seed: int
    min_clearance: float             # m, min robot-obstacle surface gap


def step(world: WorldState, command: tuple[float, float],
         dt: float) -> WorldState:
    """Advance the world by one control period.

    The robot integrates unicycle kinematics with the midpoint heading;
    pedestrians advance per their model.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    linear, angular = command
    pose = world.robot.pose
    mid_heading = pose.heading + 0.5 * angular * dt
    new_pos = pose.position + Vec2(math.cos(mid_heading),
                                   math.sin(mid_heading)) * (linear * dt)
    new_pose = Pose2(new_pos, pose.heading + angular * dt)
    new_velocity = Vec2(linear * math.cos(new_pose.heading),
                        linear * math.sin(new_pose.heading))
    robot = replace(world.robot, pose=new_pose, velocity=new_velocity)

    peds = tuple(_advance_pedestrian(p, world, dt) for p in world.pedestrians)
    return replace(world, robot=robot, pedestrians=peds,
                   time=world.time + dt)


def _advance_pedestrian(ped: Pedestrian, world: WorldState,
                        dt: float) -> Pedestrian:
    kind = ped.model.kind
    if kind == "static":
        return replace(ped, velocity=Vec2(0.0, 0.0))
    if kind in ("straight", "crossing"):
        to_goal = ped.model.goal - ped.position
        if to_goal.norm() <= PED_GOAL_TOLERANCE:
            return replace(ped, velocity=Vec2(0.0, 0.0))
        velocity = to_goal * (ped.model.speed / to_goal.norm())
    elif kind == "social_force":
        others = [p for p in world.pedestrians if p is not ped]
        velocity = social_force_update(ped, others, world.robot, dt)
    else:
        raise ValueError(f"unknown pedestrian model {kind!r}")
    return replace(ped, position=ped.position + velocity * dt,
                   velocity=velocity)


def social_force_update(ped: Pedestrian, neighbors: list[Pedestrian],
                        robot: RobotState, dt: float) -> Vec2:
    """Goal attraction plus exponential pairwise repulsion, speed-clamped."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    to_goal = ped.model.goal - ped.position
    dist = to_goal.norm()
    if dist <= PED_GOAL_TOLERANCE:
        velocity = Vec2(0.0, 0.0)
    else:
        velocity = to_goal * (ped.model.speed / dist)

    gain = ped.model.repulsion_gain
    rng_ = ped.model.repulsion_range
    if gain > 0.0:
        sources = [(n.position, n.radius) for n in neighbors]
        sources.append((robot.pose.position, robot.radius))
        for pos, radius in sources:
            away = ped.position - pos
            gap = away.norm() - ped.radius - radius
            if away.norm() == 0.0:
                continue
            strength = gain * math.exp(-max(gap, 0.0) / rng_)
            velocity = velocity + away * (strength / away.norm())

    cap = MAX_SPEED_MULTIPLIER * ped.model.speed
    speed = velocity.norm()
    if speed > cap:
        velocity = velocity * (cap / speed)
    return velocity


def detect_collision(world: WorldState) -> bool:
    """True iff the robot overlaps any body (strict: touching is safe)."""
    return min_clearance(world) < 0.0


def min_clearance(world: WorldState) -> float:
    """Smallest surface-to-surface gap between the robot and any obstacle."""
    robot = world.robot
    gap = math.inf
    for ped in world.pedestrians:
        d = (ped.position - robot.pose.position).norm()
        gap = min(gap, d - robot.radius - ped.radius)
    for disc in world.static_obstacles:
        d = (disc.center - robot.pose.position).norm()
        gap = min(gap, d - robot.radius - disc.radius)
    return gap


# ---------------------------------------------------------------------------
# Scenario generation
# ---------------------------------------------------------------------------

def _heading_towards(start: Vec2, goal: Vec2) -> float:
    return (goal - start).heading()


def make_scenario(name: str, seed: int,
                  params: Optional[ScenarioParams] = None,
                  ) -> tuple[ScenarioSpec, WorldState]:
    """Build one of the benchmark worlds, randomized from the seed.

    empty:   random start/goal, no obstacles.
    static:  disc field between start and goal.
    dynamic: crowd walking head-on at the robot from the front.
    cross:   pedestrians entering laterally from both sides, outside the
             camera FOV at spawn.
    social:  two social-force groups crossing the arena.
    """
    params = params or ScenarioParams()
    rng = np.random.default_rng([seed, _scenario_stream(name)])
    xmin, ymin, xmax, ymax = params.bounds

    if name == "empty":
        start = Vec2(float(rng.uniform(xmin + 1, xmax - 1)), ymin + 1.0)
        goal = Vec2(float(rng.uniform(xmin + 1, xmax - 1)), ymax - 1.0)
        peds: list[Pedestrian] = []
        discs: list[DiscBody] = []
    elif name == "static":
        start = Vec2(0.0, ymin + 1.0)
        goal = Vec2(0.0, ymax - 1.0)
        peds = []
        discs = _static_field(rng, params, start, goal)
    elif name == "dynamic":
        start = Vec2(0.0, ymin + 1.0)
        goal = Vec2(0.0, ymax - 1.0)
        peds = _oncoming_crowd(rng, params, start)
        discs = []
    elif name == "cross":
        start = Vec2(0.0, ymin + 1.0)
        goal = Vec2(0.0, ymax - 1.0)
        peds = _crossing_pedestrians(rng, params, start)
        discs = []
    elif name == "social":
        start = Vec2(0.0, ymin + 1.0)
        goal = Vec2(0.0, ymax - 1.0)
        peds = _social_groups(rng, params)
        discs = []
    else:
        raise ValueError(f"unknown scenario {name!r}")

    spec = ScenarioSpec(name=name, start=start, goal=goal,
                        time_limit=params.time_limit)
    robot = RobotState(pose=Pose2(start, _heading_towards(start, goal)),
                       velocity=Vec2(0.0, 0.0))
    world = WorldState(robot=robot, pedestrians=tuple(peds),
                       static_obstacles=tuple(discs), time=0.0,
                       bounds=params.bounds)
    return spec, world


def _scenario_stream(name: str) -> int:
    return SCENARIO_NAMES.index(name) + 1


def _static_field(rng, params: ScenarioParams, start: Vec2,
                  goal: Vec2) -> list[DiscBody]:
    discs: list[DiscBody] = []
    attempts = 0
    while len(discs) < params.n_static and attempts < 200:
        attempts += 1
        x = float(rng.uniform(params.bounds[0] + 1, params.bounds[2] - 1))
        y = float(rng.uniform(start.y + 2.0, goal.y - 2.0))
        r = float(rng.uniform(*params.static_radius))
        c = Vec2(x, y)
        if (c - start).norm() < 2.0 or (c - goal).norm() < 2.0:
            continue
        if any((c - d.center).norm() < r + d.radius + params.static_gap
               for d in discs):
            continue
        discs.append(DiscBody(c, r))
    return discs


def _oncoming_crowd(rng, params: ScenarioParams,
                    start: Vec2) -> list[Pedestrian]:
    peds: list[Pedestrian] = []
    while len(peds) < params.n_pedestrians:
        x = float(rng.uniform(-4.5, 4.5))
        y = float(rng.uniform(start.y + 4.0, start.y + 12.5))
        pos = Vec2(x, y)
        if any((pos - p.position).norm() < 0.9 for p in peds):
            continue
        speed = float(rng.uniform(*params.ped_speed))
        # Walk to a far point behind the robot start line, with jitter.
        goal = Vec2(x + float(rng.uniform(-3.0, 3.0)), start.y - 4.0)
        direction = goal - pos
        velocity = direction * (speed / direction.norm())
        peds.append(Pedestrian(pos, velocity, params.ped_radius,
                               PedestrianModel("straight", speed, goal)))
    return peds


def _crossing_pedestrians(rng, params: ScenarioParams, start: Vec2,
                          robot_speed: float = 0.45) -> list[Pedestrian]:
    """Lateral walkers timed against the robot's nominal corridor schedule.

    Each pedestrian is placed so it reaches the corridor shortly before
    the robot would (a crossing duel the robot must time around); one in
    four is timed to intercept the robot itself, which keeps it outside
    the camera cone for its whole approach.
    """
    peds: list[Pedestrian] = []
    while len(peds) < params.n_cross:
        side = 1.0 if rng.random() < 0.5 else -1.0
        x0 = float(rng.uniform(2.5, 6.5))
        speed = float(rng.uniform(*params.cross_speed))
        if len(peds) % 4 == 3:
            lead = float(rng.uniform(-0.5, 0.7))   # intercept course
        else:
            lead = float(rng.uniform(0.0, 12.0))   # crosses ahead, in view
        y = start.y + robot_speed * (x0 / speed + lead)
        if y > start.y + 13.5 or y < start.y + 1.0:
            continue
        pos = Vec2(side * x0, y)
        # Spawn bearing must sit outside the camera cone of the start pose.
        if abs(math.atan2(abs(pos.x), y - start.y)) <= math.radians(36.0):
            continue
        if any((pos - p.position).norm() < 0.9 for p in peds):
            continue
        goal = Vec2(-side * (x0 + 4.0), y + float(rng.uniform(-0.5, 0.5)))
        direction = goal - pos
        velocity = direction * (speed / direction.norm())
        peds.append(Pedestrian(pos, velocity, params.ped_radius,
                               PedestrianModel("crossing", speed, goal)))
    return peds


def _social_groups(rng, params: ScenarioParams) -> list[Pedestrian]:
    peds: list[Pedestrian] = []
    xmin, ymin, xmax, ymax = params.bounds
    while len(peds) < params.n_pedestrians:
        going_right = len(peds) % 2 == 0
        x = float(rng.uniform(xmin + 1, xmin + 3) if going_right
                  else rng.uniform(xmax - 3, xmax - 1))
        y = float(rng.uniform(-2.5, 2.5))
        pos = Vec2(x, y)
        if any((pos - p.position).norm() < 0.8 for p in peds):
            continue
        speed = float(rng.uniform(*params.ped_speed))
        goal = Vec2(xmax - 1.0 if going_right else xmin + 1.0,
                    y + float(rng.uniform(-1.0, 1.0)))
        direction = goal - pos
        velocity = direction * (speed / direction.norm())
        peds.append(Pedestrian(pos, velocity, params.ped_radius,
                               PedestrianModel("social_force", speed, goal)))
    return peds


# ---------------------------------------------------------------------------
# Episode execution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SensorSuite:
    camera: PinholeCamera = DEFAULT_CAMERA
    lidar_fov: float = DEFAULT_LIDAR_FOV
    lidar_range: float = DEFAULT_LIDAR_RANGE
    position_sigma: SigmaModel = DEFAULT_POSITION_SIGMA
    velocity_sigma: SigmaModel = DEFAULT_VELOCITY_SIGMA
    # Frame-to-frame error correlation; see perception.NoiseState.
    noise_correlation: float = 0.9


def run_episode(scenario: str, planner_kind: str, config: PlannerConfig,
                limits: KinematicLimits, seed: int,
                params: Optional[ScenarioParams] = None,
                sensors: Optional[SensorSuite] = None,
                trace_sink: Optional[list] = None) -> EpisodeResult:
    """Run one observe -> plan -> command -> step loop to completion.

    Fully deterministic for a given seed: the world randomization and the
    observation noise stream both derive from it.
    """
    if planner_kind not in PLANNER_KINDS:
        raise ValueError(f"unknown planner {planner_kind!r}")
    sensors = sensors or SensorSuite()
    spec, world = make_scenario(scenario, seed, params)
    planner_fn = plan if planner_kind == "ccvo" else plan_prvo_baseline
    rng = np.random.default_rng([seed, 0xC0FFEE])
    noise_state = NoiseState(sensors.noise_correlation)
    dt = limits.dt

    trajectory: list[tuple[float, Pose2]] = [(world.time, world.robot.pose)]
    length = 0.0
    clearance = min_clearance(world)
    outcome = "timeout"
    if trace_sink is not None:
        trace_sink.append(_trace_meta(spec, world, planner_kind, config, seed))

    while world.time < spec.time_limit - 0.5 * dt:
        observations = observe(
            world, sensors.camera, sensors.position_sigma,
            sensors.velocity_sigma, rng, lidar_fov=sensors.lidar_fov,
            lidar_range=sensors.lidar_range, noise_state=noise_state)
        result = planner_fn(observations, world.robot.pose,
                            world.robot.velocity, spec.goal, config, limits)
        if trace_sink is not None:
            trace_sink.append(_trace_step(world, result))
        prev = world.robot.pose.position
        world = step(world, result.command, dt)
        length += (world.robot.pose.position - prev).norm()
        trajectory.append((world.time, world.robot.pose))
        clearance = min(clearance, min_clearance(world))
        if detect_collision(world):
            outcome = "collision"
            break
        if (world.robot.pose.position - spec.goal).norm() <= GOAL_TOLERANCE:
            outcome = "success"
            break

    return EpisodeResult(outcome=outcome, trajectory_length=length,
                         navigation_time=min(world.time, spec.time_limit),
                         trajectory=tuple(trajectory), seed=seed,
                         min_clearance=clearance)


def _trace_meta(spec: ScenarioSpec, world: WorldState, planner_kind: str,
                config: PlannerConfig, seed: int) -> dict:
    return {
        "type": "meta",
        "scenario": spec.name,
        "planner": planner_kind,
        "k": config.k,
        "seed": seed,
        "bounds": list(world.bounds),
        "start": [spec.start.x, spec.start.y],
        "goal": [spec.goal.x, spec.goal.y],
        "goal_tolerance": GOAL_TOLERANCE,
        "robot_radius": world.robot.radius,
        "static_obstacles": [[d.center.x, d.center.y, d.radius]
                             for d in world.static_obstacles],
    }


def _trace_step(world: WorldState, result) -> dict:
    return {
        "type": "step",
        "time": world.time,
        "x": world.robot.pose.position.x,
        "y": world.robot.pose.position.y,
        "heading": world.robot.pose.heading,
        "chosen_vx": result.chosen_velocity.x,
        "chosen_vy": result.chosen_velocity.y,
        "feasible_count": result.feasible_count,
        "status": result.status,
        "peds": [[p.position.x, p.position.y, p.radius]
                 for p in world.pedestrians],
    }
