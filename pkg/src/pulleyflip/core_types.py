"""Domain model shared by the planners, the simulator and the CLI.

All quantities use millimetres, kilograms, newtons and radians.  Vectors are
stored as tuples of floats so that every type is an immutable value; the
numerical modules convert them to numpy arrays on entry.

The plate cross-section frame has ``u`` along the plate height ``h`` and ``v``
across the thickness ``w``; the face ``v = 0`` lies on the table before the
lift.  In the world frame the cross-section lives in the x-z plane (table at
``z = table_height``), with the first contact edge on the y axis and the plate
spanning ``y`` in ``[-l/2, l/2]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

GRAVITY = 9.8  # N/kg

Vec2 = tuple[float, float]
Vec3 = tuple[float, float, float]


def vec2(v) -> Vec2:
    a, b = (float(x) for x in v)
    return (a, b)


def vec3(v) -> Vec3:
    a, b, c = (float(x) for x in v)
    return (a, b, c)


def normalize_angle(theta: float) -> float:
    """Map an angle to the half-open interval (-pi, pi]."""
    t = math.fmod(float(theta), 2.0 * math.pi)
    if t <= -math.pi:
        t += 2.0 * math.pi
    elif t > math.pi:
        t -= 2.0 * math.pi
    return t


class ArmName(str, Enum):
    LEFT = "Left"
    RIGHT = "Right"

    @property
    def other(self) -> "ArmName":
        return ArmName.RIGHT if self is ArmName.LEFT else ArmName.LEFT


@dataclass(frozen=True)
class Pose2:
    position: Vec2
    rotation: float

    def __post_init__(self):
        object.__setattr__(self, "position", vec2(self.position))
        object.__setattr__(self, "rotation", normalize_angle(self.rotation))


@dataclass(frozen=True)
class Pose3:
    """Position plus unit quaternion stored as (x, y, z, w)."""

    position: Vec3
    orientation: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "position", vec3(self.position))
        q = np.asarray(self.orientation, dtype=float)
        n = float(np.linalg.norm(q))
        if n == 0.0:
            raise ValueError("zero quaternion")
        object.__setattr__(self, "orientation", tuple(float(x) for x in q / n))

    @classmethod
    def from_matrix(cls, position, matrix) -> "Pose3":
        q = Rotation.from_matrix(np.asarray(matrix, dtype=float)).as_quat()
        return cls(position, tuple(q))

    @property
    def matrix(self) -> np.ndarray:
        return Rotation.from_quat(self.orientation).as_matrix()

    @property
    def pos(self) -> np.ndarray:
        return np.asarray(self.position)

    def compose(self, local: "Pose3") -> "Pose3":
        R = self.matrix
        p = self.pos + R @ local.pos
        return Pose3.from_matrix(p, R @ local.matrix)


@dataclass(frozen=True)
class Box:
    """Oriented box: centre, rotation matrix rows as axes, half extents."""

    center: Vec3
    half_extents: Vec3
    axes: tuple[Vec3, Vec3, Vec3] = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    name: str = "box"

    def __post_init__(self):
        object.__setattr__(self, "center", vec3(self.center))
        object.__setattr__(self, "half_extents", vec3(self.half_extents))
        object.__setattr__(self, "axes", tuple(vec3(a) for a in self.axes))


@dataclass(frozen=True)
class PlateSpec:
    h: float
    l: float
    w: float
    m: float
    com: Vec2
    hook: Vec2
    mu0: float
    mu1: float
    name: str = "plate"

    def __post_init__(self):
        object.__setattr__(self, "com", vec2(self.com))
        object.__setattr__(self, "hook", vec2(self.hook))

    @property
    def weight(self) -> np.ndarray:
        return np.array([0.0, -self.m * GRAVITY])


@dataclass(frozen=True)
class CylinderElement:
    start: Vec3
    end: Vec3
    radius: float
    valid: bool = True

    def __post_init__(self):
        object.__setattr__(self, "start", vec3(self.start))
        object.__setattr__(self, "end", vec3(self.end))

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.subtract(self.end, self.start)))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.start) + np.asarray(self.end))

    @property
    def axis(self) -> np.ndarray:
        d = np.subtract(self.end, self.start)
        return d / np.linalg.norm(d)


@dataclass(frozen=True)
class RopeState:
    """Pull-side rope hanging from the upper pulley pin.

    ``free_length`` is the rope length available on the pull side, measured
    from the pin; it grows by the amount pulled.  ``hook_point`` is where the
    load side of the rope meets the plate.
    """

    pin_point: Vec3
    elements: tuple[CylinderElement, ...]
    hook_point: Vec3
    pulley_ratio: float = 2.0
    total_pulled: float = 0.0
    element_length: float = 30.0
    element_radius: float = 6.0
    free_length: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "pin_point", vec3(self.pin_point))
        object.__setattr__(self, "hook_point", vec3(self.hook_point))
        object.__setattr__(self, "elements", tuple(self.elements))


def rope_is_contiguous(rope: RopeState, tol: float = 1e-6) -> bool:
    """Check chain contiguity and the equal-size invariant."""
    els = rope.elements
    for a, b in zip(els[:-1], els[1:]):
        if np.linalg.norm(np.subtract(a.end, b.start)) > tol:
            return False
    for e in els:
        if abs(e.length - rope.element_length) > tol or e.radius != rope.element_radius:
            return False
    return True


@dataclass(frozen=True)
class Segment:
    start: Vec3
    end: Vec3

    def __post_init__(self):
        object.__setattr__(self, "start", vec3(self.start))
        object.__setattr__(self, "end", vec3(self.end))


@dataclass(frozen=True)
class ArmSpec:
    name: ArmName
    shoulder: Vec3
    reach_min: float
    reach_max: float
    body_segments: tuple[Segment, ...] = ()
    gripper_box: Vec3 = (40.0, 80.0, 100.0)
    cone_half_angle: float = math.radians(75.0)
    link_radius: float = 40.0
    park_point: Optional[Vec3] = None

    def __post_init__(self):
        object.__setattr__(self, "name", ArmName(self.name))
        object.__setattr__(self, "shoulder", vec3(self.shoulder))
        object.__setattr__(self, "gripper_box", vec3(self.gripper_box))
        object.__setattr__(self, "body_segments", tuple(self.body_segments))
        if self.park_point is not None:
            object.__setattr__(self, "park_point", vec3(self.park_point))


@dataclass(frozen=True)
class TumbleParams:
    """Weights, bounds and chaining limits of the sliding-push optimisation.

    ``dt`` may be left as None, in which case the planner derives it from
    ``v_max`` and the plate geometry.  ``speed_limit`` and ``direction_limit``
    switch the two chaining constraints on or off for ablations.
    """

    k1: float = 1.0
    k2: float = 1.0
    k3: float = 1.0
    f1_sq_max: float = 900.0
    v_max: float = 30.0
    gamma: float = math.radians(20.0)
    dt: Optional[float] = None
    n_steps: int = 60
    speed_limit: bool = True
    direction_limit: bool = True


@dataclass(frozen=True)
class Scenario:
    plate: PlateSpec
    arms: tuple[ArmSpec, ArmSpec]
    rope: RopeState
    table_height: float = 0.0
    alpha_thld: float = math.radians(70.0)
    quality_weights: Vec3 = (1.0, 1.0, 1.0)
    goal_sample_count: int = 150
    tumble_params: TumbleParams = field(default_factory=TumbleParams)
    noise_sigma_angle: float = 0.0
    rng_seed: int = 0
    scenario_id: str = "scenario"
    grasps_per_element: int = 24
    obstacles: tuple[Box, ...] = ()
    alpha_tol: float = math.radians(1.0)
    bootstrap_pull: float = 150.0
    force_cap: float = 200.0
    max_loops: int = 40
    sweep_steps: int = 20
    push_arm: ArmName = ArmName.LEFT
    first_arm: ArmName = ArmName.RIGHT
    push_plane_y: float = 0.0  # world y of the vertical plane the fingertip pushes in

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))
        object.__setattr__(self, "quality_weights", vec3(self.quality_weights))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "push_arm", ArmName(self.push_arm))
        object.__setattr__(self, "first_arm", ArmName(self.first_arm))

    def arm(self, name: ArmName) -> ArmSpec:
        for a in self.arms:
            if a.name == ArmName(name):
                return a
        raise KeyError(name)

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def _inside_rect(p: Vec2, h: float, w: float, tol: float = 1e-9) -> bool:
    return -tol <= p[0] <= h + tol and -tol <= p[1] <= w + tol


def validate_scenario(s: Scenario) -> ValidationReport:
    """Collect every violated invariant; an empty report means runnable."""
    v: list[str] = []
    p = s.plate
    for name in ("h", "l", "w", "m"):
        if not getattr(p, name) > 0:
            label = "mass" if name == "m" else name
            v.append(f"plate.{name}: {label} must be positive")
    for name in ("mu0", "mu1"):
        mu = getattr(p, name)
        if not 0.0 < mu <= 2.0:
            v.append(f"plate.{name}: friction coefficient must lie in (0, 2]")
    if p.h > 0 and p.w > 0:
        if not _inside_rect(p.com, p.h, p.w):
            v.append("plate.com: centre of mass must lie in the cross-section")
        if not _inside_rect(p.hook, p.h, p.w):
            v.append("plate.hook: hook point must lie in the cross-section")
    if len(s.arms) != 2 or {a.name for a in s.arms} != {ArmName.LEFT, ArmName.RIGHT}:
        v.append("arms: exactly one Left and one Right arm are required")
    for a in s.arms:
        if not 0 < a.reach_min < a.reach_max:
            v.append(f"arms.{a.name.value}: need 0 < reach_min < reach_max")
    r = s.rope
    if r.pulley_ratio < 1:
        v.append("rope.pulley_ratio: must be at least 1")
    if not rope_is_contiguous(r):
        v.append("rope.elements: chain must be contiguous with equal elements")
    if not 0.0 < s.alpha_thld < math.pi / 2 and s.alpha_thld != 0.0:
        v.append("alpha_thld: threshold must lie in (0, pi/2)")
    w = np.asarray(s.quality_weights)
    if np.any(w < 0):
        v.append("quality_weights: weights must be nonnegative")
    elif not np.any(w > 0):
        v.append("quality_weights: all-zero weight vector")
    if s.goal_sample_count < 1:
        v.append("goal_sample_count: need at least one goal sample")
    t = s.tumble_params
    if min(t.k1, t.k2, t.k3) < 0 or t.k1 + t.k2 + t.k3 <= 0:
        v.append("tumble_params.k: weights must be nonnegative and not all zero")
    if not t.f1_sq_max > 0:
        v.append("tumble_params.f1_sq_max: must be positive")
    if not (t.v_max > 0 and math.isfinite(t.v_max)):
        v.append("tumble_params.v_max: must be positive and finite")
    if not 0 < t.gamma <= math.pi:
        v.append("tumble_params.gamma: must lie in (0, pi]")
    if t.n_steps < 2:
        v.append("tumble_params.n_steps: need at least two steps")
    if s.noise_sigma_angle < 0:
        v.append("noise_sigma_angle: must be nonnegative")
    if s.grasps_per_element < 2 or s.grasps_per_element % 2:
        v.append("grasps_per_element: must be a positive even number")
    return ValidationReport(tuple(v))


def plate_rotation_matrix(alpha: float) -> np.ndarray:
    """World axes of the plate (columns u, l, v) after tilting by ``alpha``."""
    c, s = math.cos(alpha), math.sin(alpha)
    return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])


def cross2(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def rot2(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def as_array(points: Sequence) -> np.ndarray:
    return np.asarray(points, dtype=float)
