"""Goal sampling, init-goal scoring and straight-line pulling commands.

A pull starts at a cylinder element of the hanging rope and ends at a goal
point sampled in the arm's workspace.  Each candidate goal is scored by a
weighted sum of three normalized terms: how far the goal is from the pin
(longer pulls), how steep the stretched rope is (lower hand load) and how many
grasps at the start element also work at the goal (easier re-planning).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from .core_types import ArmName, ArmSpec, Pose3, RopeState, vec3
from .errors import DegenerateBatch, MotionPlanFailed, NoFeasiblePair, NoInitialGrasp, NoInitialPose
from .workspace import (
    BlockingBody,
    GraspFeasibility,
    GraspPose,
    SceneBodies,
    SharedGraspSet,
    annotate_grasps,
    collision_causes,
    element_pose,
    feasibility_matrix,
    goal_element_pose,
    grasp_feasibility,
    reachable_mask,
)


@dataclass(frozen=True)
class GoalSample:
    point: tuple
    l_i: float
    theta_i: float
    index: int = 0


@dataclass(frozen=True)
class QualityVector:
    f_length: float
    f_load: float
    f_grasps: float

    def as_array(self) -> np.ndarray:
        return np.array([self.f_length, self.f_load, self.f_grasps])


@dataclass(frozen=True)
class InitGoalPair:
    init_element_index: int
    goal: GoalSample
    shared: SharedGraspSet
    f: QualityVector
    Q: float


@dataclass(frozen=True)
class PullCommand:
    arm: ArmName
    grasp: GraspPose
    start: Pose3
    end: Pose3
    path_length: float

    def truncated(self, length: float) -> "PullCommand":
        """Same straight line, stopped after ``length`` millimetres."""
        length = min(max(length, 0.0), self.path_length)
        a, b = self.start.pos, self.end.pos
        p = a + (b - a) * (length / self.path_length)
        return replace(self, end=Pose3(p, self.end.orientation), path_length=float(length))


@dataclass(frozen=True)
class InitSelection:
    index: int
    feasibility: tuple
    rope: RopeState


def select_init_element(rope: RopeState, arm: ArmSpec, scene: SceneBodies, k: int = 24) -> InitSelection:
    """Topmost valid element with a feasible grasp.

    Elements scanned on the way that have no feasible grasp are marked
    invalid in the returned rope.
    """
    if not rope.elements:
        raise NoInitialPose("rope has no elements")
    grasps = annotate_grasps(None, k)
    elements = list(rope.elements)
    for i, el in enumerate(elements):
        if not el.valid:
            continue
        feas = grasp_feasibility(arm, element_pose(el), grasps, scene)
        if any(f.feasible for f in feas):
            return InitSelection(i, tuple(feas), replace(rope, elements=tuple(elements)))
        elements[i] = replace(el, valid=False)
    raise NoInitialPose("every rope element is invalid or unreachable", rope=replace(rope, elements=tuple(elements)))


def goal_geometry(pin, point) -> tuple[float, float]:
    """Pin-to-goal distance and the stretched rope's angle from vertical."""
    v = np.asarray(point, float) - np.asarray(pin, float)
    l = float(np.linalg.norm(v))
    theta = math.acos(min(1.0, max(-1.0, -v[2] / l))) if l > 0 else 0.0
    return l, theta


def sample_goals(
    arm: ArmSpec, rope: RopeState, n: int, rng: np.random.Generator, table_height: float = 0.0
) -> list[GoalSample]:
    """Uniform samples in the reach shell, below the pin and above the table."""
    if n < 1:
        raise ValueError("need at least one sample")
    sh = np.asarray(arm.shoulder)
    pin = np.asarray(rope.pin_point)
    z_hi = pin[2]
    out: list[np.ndarray] = []
    batch = max(64, 4 * n)
    for _ in range(10_000):
        cand = sh + rng.uniform(-arm.reach_max, arm.reach_max, size=(batch, 3))
        r = np.linalg.norm(cand - sh, axis=1)
        keep = (r >= arm.reach_min) & (r <= arm.reach_max) & (cand[:, 2] < z_hi) & (cand[:, 2] > table_height)
        out.extend(cand[keep])
        if len(out) >= n:
            break
    if len(out) < n:
        raise ValueError("reach shell does not intersect the sampling region")
    samples = []
    for i, p in enumerate(out[:n]):
        l, th = goal_geometry(pin, p)
        samples.append(GoalSample(vec3(p), l, th, i))
    return samples


def quality_length(l_i: float, l_min: float, l_max: float) -> float:
    if l_max == l_min:
        raise DegenerateBatch("all samples are equally far from the pin")
    return (l_i - l_min) / (l_max - l_min)


def quality_load(theta_i: float) -> float:
    return math.cos(theta_i)


def quality_grasps(shared: SharedGraspSet) -> float:
    if shared.n_init == 0:
        raise NoInitialGrasp("no grasp is feasible at the initial element")
    return shared.n_goal / shared.n_init


def score(weights, f: QualityVector) -> float:
    w = np.asarray(weights, float)
    return float(w @ f.as_array())


def evaluate_samples(
    rope: RopeState,
    arm: ArmSpec,
    scene: SceneBodies,
    samples: Sequence[GoalSample],
    init_index: int,
    k: int = 24,
    init_feasibility: Optional[Sequence[GraspFeasibility]] = None,
) -> list[SharedGraspSet]:
    """Shared grasp set of every sample (in sample order), batched over samples."""
    el = rope.elements[init_index]
    if init_feasibility is None:
        init_feasibility = grasp_feasibility(arm, element_pose(el), annotate_grasps(el, k), scene)
    ok_init = [f.grasp for f in init_feasibility if f.feasible]
    if not ok_init:
        raise NoInitialGrasp("no feasible grasp at the initial element")
    poses = [goal_element_pose(rope.pin_point, s.point) for s in samples]
    table = feasibility_matrix(arm, poses, ok_init, scene)
    out = []
    for row in table:
        members = tuple(g for g, ok in zip(ok_init, row) if ok)
        out.append(SharedGraspSet(len(ok_init), len(members), members))
    return out


def rank_pairs(weights, samples: Sequence[GoalSample], shared: Sequence[SharedGraspSet], init_index: int) -> list[InitGoalPair]:
    """Score samples with at least one shared grasp, best first.

    The length term is normalized over the feasible samples only.  Ties in
    the score go to the longer pull, then to the earlier sample.
    """
    feas = [(s, g) for s, g in zip(samples, shared) if g.n_goal >= 1]
    if not feas:
        return []
    ls = [s.l_i for s, _ in feas]
    l_min, l_max = min(ls), max(ls)
    pairs = []
    for s, g in feas:
        try:
            fl = quality_length(s.l_i, l_min, l_max)
        except DegenerateBatch:
            fl = 1.0
        f = QualityVector(fl, quality_load(s.theta_i), quality_grasps(g))
        pairs.append(InitGoalPair(init_index, s, g, f, score(weights, f)))
    pairs.sort(key=lambda p: (-p.Q, -p.goal.l_i, p.goal.index))
    return pairs


def select_best_pair(
    rope: RopeState,
    arm: ArmSpec,
    scene: SceneBodies,
    weights,
    samples: Sequence[GoalSample],
    init_index: int = 0,
    k: int = 24,
    init_feasibility: Optional[Sequence[GraspFeasibility]] = None,
) -> InitGoalPair:
    shared = evaluate_samples(rope, arm, scene, samples, init_index, k, init_feasibility)
    ranked = rank_pairs(weights, samples, shared, init_index)
    if not ranked:
        raise NoFeasiblePair("no sampled goal shares a grasp with the initial element")
    return ranked[0]


def plan_pull(
    pair: InitGoalPair,
    arm: ArmSpec,
    rope: RopeState,
    scene: SceneBodies,
    steps: int = 20,
) -> PullCommand:
    """First shared grasp whose straight-line sweep stays feasible."""
    if not pair.shared.members:
        raise MotionPlanFailed("pair has no shared grasps")
    el = rope.elements[pair.init_element_index]
    start = element_pose(el)
    end = goal_element_pose(rope.pin_point, pair.goal.point)
    ts = np.linspace(0.0, 1.0, steps + 1)
    key = Rotation.from_quat([start.orientation, end.orientation])
    frames = Slerp([0.0, 1.0], key)(ts).as_matrix()
    centres = start.pos + ts[:, None] * (end.pos - start.pos)
    blockers: set = set()
    for g in pair.shared.members:
        L = g.element_local_transform
        Rs = frames @ L.matrix
        ps = centres + frames @ L.pos
        if not reachable_mask(arm, ps, Rs[:, :, 2], scene.table_height).all():
            blockers.add(None)
            continue
        causes = collision_causes(arm, ps, Rs, scene)
        hit = [c for c in causes if c is not None]
        if not hit:
            d = float(np.linalg.norm(end.pos - start.pos))
            return PullCommand(arm.name, g, start.compose(L), end.compose(L), d)
        blockers.add(hit[0])
    raise MotionPlanFailed(
        "every shared grasp collides along the straight pull",
        blockers=tuple(sorted((b.value for b in blockers if b is not None))),
        other_arm_only=blockers == {BlockingBody.OTHER_ARM},
    )
