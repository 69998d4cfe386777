"""Grasp annotation, arm reachability and coarse collision checks.

Reachability is a distance shell around the shoulder plus a cone of feasible
approach directions.  Collisions use oriented boxes for the gripper, the
plate and obstacles, capsules for arm links and body parts, and a half-space
for the table.  All checks over a grasp set are vectorized over the grasps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .core_types import ArmSpec, Box, CylinderElement, Pose3, Segment
from .errors import NoInitialGrasp


class BlockingBody(str, Enum):
    TABLE = "Table"
    PLATE = "Plate"
    OBSTACLE = "Obstacle"
    OTHER_ARM = "OtherArm"
    SELF_BODY = "SelfBody"


@dataclass(frozen=True)
class GraspPose:
    element_local_transform: Pose3
    approach_index: int


@dataclass(frozen=True)
class GraspFeasibility:
    grasp: GraspPose
    reachable: bool
    collision_free: Optional[bool]
    blocking_body: Optional[BlockingBody] = None

    @property
    def feasible(self) -> bool:
        return self.reachable and bool(self.collision_free)


@dataclass(frozen=True)
class SharedGraspSet:
    n_init: int
    n_goal: int
    members: tuple


@dataclass(frozen=True)
class SceneBodies:
    """Everything an arm can collide with.

    ``other_arm`` lists capsule axes of the idle arm (link radius
    ``other_radius``).
    """

    table_height: float = 0.0
    plate: Optional[Box] = None
    obstacles: tuple = ()
    other_arm: tuple = ()
    other_radius: float = 40.0

    def without_obstacle(self, index: int) -> "SceneBodies":
        obs = tuple(o for i, o in enumerate(self.obstacles) if i != index)
        return SceneBodies(self.table_height, self.plate, obs, self.other_arm, self.other_radius)


# ---------------------------------------------------------------- frames


def frame_from_axis(axis) -> np.ndarray:
    """Zero-twist frame whose x axis is ``axis``.

    The y axis is horizontal (perpendicular to world z) unless the axis is
    vertical, in which case world y is projected instead.
    """
    x = np.asarray(axis, dtype=float)
    x = x / np.linalg.norm(x)
    ref = np.array([0.0, 0.0, 1.0])
    y = np.cross(ref, x)
    if np.linalg.norm(y) < 1e-9:
        y = np.array([0.0, 1.0, 0.0]) - x * x[1]
    y = y / np.linalg.norm(y)
    z = np.cross(x, y)
    return np.column_stack([x, y, z])


def element_pose(element: CylinderElement) -> Pose3:
    return Pose3.from_matrix(element.center, frame_from_axis(element.axis))


def goal_element_pose(pin, goal) -> Pose3:
    """Pose of an element at ``goal`` lying along the stretched rope from the pin."""
    return Pose3.from_matrix(goal, frame_from_axis(np.subtract(goal, pin)))


def annotate_grasps(element: Optional[CylinderElement] = None, k: int = 24) -> list[GraspPose]:
    """``k / 2`` rotations about the cylinder axis, each with two wrist flips.

    Grasp frames are local to the element: the gripper z axis is the approach
    direction, perpendicular to the cylinder, and its y axis runs along the
    cylinder in one of two senses.
    """
    if element is not None and not element.valid:
        raise ValueError("cannot annotate an invalidated element")
    n_rot = k // 2
    out = []
    for j in range(n_rot):
        phi = 2 * math.pi * j / n_rot
        z = np.array([0.0, math.cos(phi), math.sin(phi)])
        for flip in (0, 1):
            y = np.array([1.0, 0.0, 0.0]) * (1 if flip == 0 else -1)
            x = np.cross(y, z)
            R = np.column_stack([x, y, z])
            out.append(GraspPose(Pose3.from_matrix((0.0, 0.0, 0.0), R), 2 * j + flip))
    return out


def world_grasps(pose: Pose3, grasps: Sequence[GraspPose]) -> tuple[np.ndarray, np.ndarray]:
    """Positions (K, 3) and rotation matrices (K, 3, 3) of grasps at ``pose``."""
    R = pose.matrix
    Rs = np.array([R @ g.element_local_transform.matrix for g in grasps])
    ps = np.array([pose.pos + R @ g.element_local_transform.pos for g in grasps])
    return ps, Rs


# ---------------------------------------------------------------- reachability


def reachable_mask(arm: ArmSpec, positions, approaches, table_height: float = 0.0) -> np.ndarray:
    p = np.atleast_2d(np.asarray(positions, dtype=float))
    a = np.atleast_2d(np.asarray(approaches, dtype=float))
    rel = p - np.asarray(arm.shoulder)
    dist = np.linalg.norm(rel, axis=1)
    an = a / np.linalg.norm(a, axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        cosang = np.einsum("ij,ij->i", rel, an) / dist
    in_cone = cosang >= math.cos(arm.cone_half_angle) - 1e-12
    return (dist >= arm.reach_min) & (dist <= arm.reach_max) & in_cone & (p[:, 2] >= table_height)


def check_reachable(arm: ArmSpec, world_grasp: Pose3, table_height: float = 0.0) -> bool:
    """Shell and approach-cone test.

    The approach direction is the gripper z axis; it must point away from the
    shoulder (the hand reaches outwards) to within the arm's cone half angle.
    """
    return bool(reachable_mask(arm, world_grasp.pos, world_grasp.matrix[:, 2], table_height)[0])


# ---------------------------------------------------------------- primitives


def gripper_boxes(arm: ArmSpec, positions, rotations):
    """Centres, half extents and axes (K, 3, 3 as rows) of gripper boxes.

    The box extends backwards from the grasp point along the approach axis.
    """
    he = 0.5 * np.asarray(arm.gripper_box)
    R = np.asarray(rotations)
    centers = np.asarray(positions) - R[:, :, 2] * he[2]
    axes = np.transpose(R, (0, 2, 1))
    return centers, np.broadcast_to(he, centers.shape), axes


def obb_overlap(c1, h1, a1, c2, h2, a2) -> np.ndarray:
    """Separating-axis test between batches of oriented boxes.

    ``a`` holds box axes as rows; arrays broadcast over the leading dimension.
    """
    c1, h1, a1 = np.asarray(c1, float), np.asarray(h1, float), np.asarray(a1, float)
    c2, h2, a2 = np.asarray(c2, float), np.asarray(h2, float), np.asarray(a2, float)
    c1, c2 = np.broadcast_arrays(c1, c2)
    a1, a2 = np.broadcast_arrays(a1, a2)
    h1, h2 = np.broadcast_arrays(h1, h2)
    cand = [a1[..., i, :] for i in range(3)] + [a2[..., i, :] for i in range(3)]
    for i in range(3):
        for j in range(3):
            cand.append(np.cross(a1[..., i, :], a2[..., j, :]))
    d = c2 - c1
    sep = np.zeros(c1.shape[:-1], bool)
    for L in cand:
        n = np.linalg.norm(L, axis=-1)
        use = n > 1e-9
        Ln = L / np.where(use, n, 1.0)[..., None]
        r1 = (np.abs(np.einsum("...ij,...j->...i", a1, Ln)) * h1).sum(-1)
        r2 = (np.abs(np.einsum("...ij,...j->...i", a2, Ln)) * h2).sum(-1)
        dist = np.abs(np.einsum("...j,...j->...", d, Ln))
        sep |= use & (dist > r1 + r2)
    return ~sep


def point_box_distance(points, center, half, axes) -> np.ndarray:
    """Euclidean distance from points to oriented boxes (zero inside).

    Box arrays may carry a leading batch dimension matching ``points``.
    """
    rel = np.asarray(points, float) - np.asarray(center, float)
    q = np.einsum("...ij,...j->...i", np.asarray(axes, float), rel)
    excess = np.maximum(np.abs(q) - np.asarray(half, float), 0.0)
    return np.linalg.norm(excess, axis=-1)


def segment_box_distance(a, b, center, half, axes, iters: int = 60) -> np.ndarray:
    """Distance from segments to boxes by ternary search along each segment.

    The point-to-box distance is convex along a segment, so the search finds
    the global minimum.  Segment and box arrays broadcast over a leading
    batch dimension.
    """
    a = np.atleast_2d(np.asarray(a, float))
    b = np.atleast_2d(np.asarray(b, float))
    center = np.asarray(center, float)
    n = max(len(a), len(b), center.shape[0] if center.ndim == 2 else 1)
    a = np.broadcast_to(a, (n, 3))
    b = np.broadcast_to(b, (n, 3))
    lo = np.zeros(n)
    hi = np.ones(n)
    f = lambda t: point_box_distance(a + t[:, None] * (b - a), center, half, axes)
    for _ in range(iters):
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        left = f(m1) <= f(m2)
        hi = np.where(left, m2, hi)
        lo = np.where(left, lo, m1)
    return f(0.5 * (lo + hi))


def segment_segment_distance(p1, q1, p2, q2) -> np.ndarray:
    """Closest distance between 3-D segments (broadcasting over a batch)."""
    p1, q1, p2, q2 = (np.asarray(x, float) for x in (p1, q1, p2, q2))
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    dot = lambda x, y: np.einsum("...i,...i->...", x, y)
    a, e, f = dot(d1, d1), dot(d2, d2), dot(d2, r)
    c, b = dot(d1, r), dot(d1, d2)
    a_s = np.where(a > 1e-12, a, 1.0)
    e_s = np.where(e > 1e-12, e, 1.0)
    den = a * e - b * b
    s = np.where(den > 1e-12, np.clip((b * f - c * e) / np.where(den > 1e-12, den, 1.0), 0, 1), 0.0)
    t = (b * s + f) / e_s
    s = np.where(t < 0, np.clip(-c / a_s, 0, 1), np.where(t > 1, np.clip((b - c) / a_s, 0, 1), s))
    t = np.clip(t, 0, 1)
    # degenerate segments collapse to points
    s = np.where(a <= 1e-12, 0.0, s)
    t = np.where(a <= 1e-12, np.clip(f / e_s, 0, 1), t)
    t = np.where(e <= 1e-12, 0.0, t)
    s = np.where((e <= 1e-12) & (a > 1e-12), np.clip(-c / a_s, 0, 1), s)
    diff = (p1 + d1 * s[..., None]) - (p2 + d2 * t[..., None])
    return np.linalg.norm(diff, axis=-1)


def _capsule_hits_gripper(seg: Segment, radius: float, centers, halves, axes) -> np.ndarray:
    if len(centers) == 0:
        return np.zeros(0, bool)
    return segment_box_distance(seg.start, seg.end, centers, halves, axes) < radius


def _box_arrays(box: Box):
    return np.asarray(box.center), np.asarray(box.half_extents), np.asarray(box.axes)


# ---------------------------------------------------------------- collisions


def collision_causes(arm: ArmSpec, positions, rotations, scene: SceneBodies) -> list:
    """First blocking body per grasp (None when free), in a fixed check order."""
    positions = np.atleast_2d(np.asarray(positions, float))
    rotations = np.asarray(rotations, float).reshape(-1, 3, 3)
    K = len(positions)
    centers, halves, axes = gripper_boxes(arm, positions, rotations)
    wrists = positions - rotations[:, :, 2] * arm.gripper_box[2]
    shoulder = np.broadcast_to(np.asarray(arm.shoulder), wrists.shape)
    hit = {}

    # table: lowest gripper corner below the surface
    low = centers[:, 2] - (np.abs(axes[:, :, 2]) * halves).sum(-1)
    hit[BlockingBody.TABLE] = low < scene.table_height - 1e-9

    def box_hits(box: Box):
        bc, bh, ba = _box_arrays(box)
        grip = obb_overlap(centers, halves, axes, bc, bh, ba)
        link = segment_box_distance(shoulder, wrists, bc, bh, ba) < arm.link_radius
        return grip | link

    hit[BlockingBody.PLATE] = box_hits(scene.plate) if scene.plate is not None else np.zeros(K, bool)
    obs = np.zeros(K, bool)
    for box in scene.obstacles:
        obs |= box_hits(box)
    hit[BlockingBody.OBSTACLE] = obs

    other = np.zeros(K, bool)
    for seg in scene.other_arm:
        other |= _capsule_hits_gripper(seg, scene.other_radius, centers, halves, axes)
        d = segment_segment_distance(shoulder, wrists, np.asarray(seg.start), np.asarray(seg.end))
        other |= d < arm.link_radius + scene.other_radius
    hit[BlockingBody.OTHER_ARM] = other

    own = np.zeros(K, bool)
    for seg in arm.body_segments:
        own |= _capsule_hits_gripper(seg, arm.link_radius, centers, halves, axes)
    hit[BlockingBody.SELF_BODY] = own

    causes: list = [None] * K
    for body in reversed(BlockingBody):
        for i in np.flatnonzero(hit[body]):
            causes[i] = body
    return causes


def check_collisions(arm: ArmSpec, world_grasp: Pose3, scene: SceneBodies, grasp: Optional[GraspPose] = None) -> GraspFeasibility:
    cause = collision_causes(arm, world_grasp.pos[None], world_grasp.matrix[None], scene)[0]
    g = grasp or GraspPose(world_grasp, -1)
    return GraspFeasibility(g, True, cause is None, cause)


def grasp_feasibility(arm: ArmSpec, pose: Pose3, grasps: Sequence[GraspPose], scene: SceneBodies) -> list[GraspFeasibility]:
    """Reachability then collisions for every grasp placed at ``pose``."""
    ps, Rs = world_grasps(pose, grasps)
    reach = reachable_mask(arm, ps, Rs[:, :, 2], scene.table_height)
    out: list[Optional[GraspFeasibility]] = [None] * len(grasps)
    idx = np.flatnonzero(reach)
    causes = collision_causes(arm, ps[idx], Rs[idx], scene) if len(idx) else []
    for i, c in zip(idx, causes):
        out[i] = GraspFeasibility(grasps[i], True, c is None, c)
    for i in range(len(grasps)):
        if out[i] is None:
            out[i] = GraspFeasibility(grasps[i], False, None, None)
    return out  # type: ignore[return-value]


def feasibility_matrix(arm: ArmSpec, poses: Sequence[Pose3], grasps: Sequence[GraspPose], scene: SceneBodies) -> np.ndarray:
    """Boolean (len(poses), len(grasps)) table of reachable, collision-free grasps."""
    if not poses or not grasps:
        return np.zeros((len(poses), len(grasps)), bool)
    Rp = np.array([p.matrix for p in poses])
    pp = np.array([p.pos for p in poses])
    Rg = np.array([g.element_local_transform.matrix for g in grasps])
    pg = np.array([g.element_local_transform.pos for g in grasps])
    Rs = np.einsum("pij,gjk->pgik", Rp, Rg).reshape(-1, 3, 3)
    ps = (pp[:, None, :] + np.einsum("pij,gj->pgi", Rp, pg)).reshape(-1, 3)
    ok = reachable_mask(arm, ps, Rs[:, :, 2], scene.table_height)
    idx = np.flatnonzero(ok)
    if len(idx):
        causes = collision_causes(arm, ps[idx], Rs[idx], scene)
        ok[idx] = [c is None for c in causes]
    return ok.reshape(len(poses), len(grasps))


def shared_grasps(
    init_elem: CylinderElement,
    goal_pose: Pose3,
    arm: ArmSpec,
    scene: SceneBodies,
    k: int = 24,
    init_feasibility: Optional[list] = None,
) -> SharedGraspSet:
    """Grasps feasible at the initial element whose local transform also works at the goal."""
    if not init_elem.valid:
        raise ValueError("initial element is invalidated")
    grasps = annotate_grasps(init_elem, k)
    at_init = init_feasibility or grasp_feasibility(arm, element_pose(init_elem), grasps, scene)
    ok_init = [f.grasp for f in at_init if f.feasible]
    if not ok_init:
        raise NoInitialGrasp("no feasible grasp at the initial element")
    at_goal = grasp_feasibility(arm, goal_pose, ok_init, scene)
    members = tuple(f.grasp for f in at_goal if f.feasible)
    return SharedGraspSet(len(ok_init), len(members), members)
