"""Planar and pinhole-camera geometry primitives.

Coordinate conventions (used everywhere else in the package, documented
only here):

  World frame:   x/y in meters, right-handed. A heading of 0 rad points
                 along +x; headings are normalized to (-pi, pi].
  Robot frame:   y forward (along the heading), x lateral to the right.
                 A Lidar return of range l at beam angle theta lands at
                 (l*sin(theta), l*cos(theta)); theta = 0 is straight ahead.
  Camera frame:  x right, y down, z forward (optical axis). The camera
                 looks along the robot's forward axis, so planar motion
                 shows up in (x, z).
  Image frame:   pixel u right, v down, origin at the top-left corner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.remainder(angle, TWO_PI)
    if wrapped <= -math.pi:
        wrapped += TWO_PI
    return wrapped


@dataclass(frozen=True, slots=True)
class Vec2:
    """Planar vector; meters for positions, m/s when used as a velocity."""

    x: float
    y: float

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def __mul__(self, scale: float) -> "Vec2":
        return Vec2(self.x * scale, self.y * scale)

    __rmul__ = __mul__

    def dot(self, other: "Vec2") -> float:
        return self.x * other.x + self.y * other.y

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def norm_sq(self) -> float:
        return self.x * self.x + self.y * self.y

    def heading(self) -> float:
        """Direction of the vector in world frame, atan2(y, x)."""
        return math.atan2(self.y, self.x)

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True, slots=True)
class Pose2:
    """Planar pose; the heading is normalized to (-pi, pi] on construction."""

    position: Vec2
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    def forward(self) -> Vec2:
        """Unit vector along the heading, in world frame."""
        return Vec2(math.cos(self.heading), math.sin(self.heading))


@dataclass(frozen=True, slots=True)
class DiscBody:
    center: Vec2
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"disc radius must be positive, got {self.radius}")


@dataclass(frozen=True, slots=True)
class PinholeCamera:
    """Intrinsics of an ideal pinhole camera (no distortion).

    fx, fy are focal lengths in pixels, (cx, cy) the principal point,
    width/height the image resolution.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @property
    def fov_horizontal(self) -> float:
        """Horizontal field of view in radians, 2*atan(width / (2*fx))."""
        return 2.0 * math.atan(self.width / (2.0 * self.fx))


# Astra-class RGB camera: f = 457 px at 640x480 gives a ~70 degree
# horizontal field of view. Principal point defaults to the image center.
DEFAULT_CAMERA = PinholeCamera(fx=457.0, fy=457.0, cx=320.0, cy=240.0,
                               width=640, height=480)


@dataclass(frozen=True)
class LidarScan:
    """A single planar scan: range l_i at beam angle theta_i (robot frame)."""

    ranges: tuple[float, ...]
    angles: tuple[float, ...]
    fov: float
    max_range: float

    def __post_init__(self):
        if len(self.ranges) != len(self.angles):
            raise ValueError("ranges and angles must have equal length")
        if any(r <= 0 or r > self.max_range for r in self.ranges):
            raise ValueError("ranges must lie in (0, max_range]")
        if any(b <= a for a, b in zip(self.angles, self.angles[1:])):
            raise ValueError("angles must be strictly increasing")


def backproject_pixel(cam: PinholeCamera, px: float, py: float,
                      d: float) -> tuple[float, float, float]:
    """Lift pixel (px, py) at depth d to a camera-frame 3D point.

    Returns ((px*d - cx*d)/fx, (py*d - cy*d)/fy, d).
    """
    if d <= 0:
        raise ValueError(f"depth must be positive, got {d}")
    return ((px * d - cam.cx * d) / cam.fx,
            (py * d - cam.cy * d) / cam.fy,
            d)


def project_point(cam: PinholeCamera,
                  p: tuple[float, float, float]) -> tuple[float, float, float]:
    """Project a camera-frame 3D point to (px, py, depth)."""
    x, y, z = p
    if z <= 0:
        raise ValueError(f"point is behind the camera, z={z}")
    return (cam.fx * x / z + cam.cx, cam.fy * y / z + cam.cy, z)


def lidar_to_points(scan: LidarScan) -> list[Vec2]:
    """Convert a scan to robot-frame points, (l*sin(theta), l*cos(theta))."""
    return [Vec2(r * math.sin(a), r * math.cos(a))
            for r, a in zip(scan.ranges, scan.angles)]


def flow_warp(s1: tuple[float, float],
              flow_at_s1: tuple[float, float]) -> tuple[float, float]:
    """Map a current-frame pixel to its previous-frame location, s0 = s1 + flow.

    The result may fall outside the image; callers decide whether that
    correspondence is usable (out-of-frame pixels are dropped, not clamped).
    """
    return (s1[0] + flow_at_s1[0], s1[1] + flow_at_s1[1])


def robot_frame_components(v: Vec2, heading: float) -> tuple[float, float]:
    """World vector -> (lateral, forward) components in the robot frame."""
    forward = v.x * math.cos(heading) + v.y * math.sin(heading)
    lateral = v.x * math.sin(heading) - v.y * math.cos(heading)
    return (lateral, forward)


def bearing_from_heading(v: Vec2, heading: float) -> float:
    """Signed bearing of a world vector relative to a heading, in (-pi, pi]."""
    return wrap_angle(v.heading() - heading)
