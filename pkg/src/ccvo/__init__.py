"""Chance-constrained velocity-obstacle navigation in 2D crowds."""

from .chance import (ChanceStats, RelativeDistribution, cantelli_bound,
                     deterministic_vo_contains, f_stats, is_feasible_chance,
                     relative_stats)
from .geometry import (DEFAULT_CAMERA, DiscBody, LidarScan, PinholeCamera,
                       Pose2, Vec2, backproject_pixel, flow_warp,
                       lidar_to_points, project_point, wrap_angle)
from .perception import (ObstacleObservation, SegmentationMask, SigmaModel,
                         estimate_velocity, eval_sigma,
                         flow_displacement_error, inflate_radius,
                         masked_centroid, observe)
from .planner import (KinematicLimits, PlanResult, PlannerConfig,
                      VelocityGrid, fov_constraint, kinematic_feasible,
                      lidar_ped_constraint, plan, plan_prvo_baseline,
                      preferred_velocity, to_command)
from .sim import (EpisodeResult, Pedestrian, PedestrianModel, RobotState,
                  ScenarioParams, ScenarioSpec, SensorSuite, WorldState,
                  detect_collision, make_scenario, run_episode,
                  social_force_update, step)

__version__ = "0.1.0"
