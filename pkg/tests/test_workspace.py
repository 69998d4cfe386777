import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles as O
from pulleyflip.core_types import ArmName, ArmSpec, Box, CylinderElement, Pose3, Segment
from pulleyflip.errors import NoInitialGrasp
from pulleyflip.pull_planner import select_init_element
from pulleyflip.scenarios import make_scenario
from pulleyflip.sim import initial_state, plate_box
from pulleyflip.workspace import (
    BlockingBody,
    SceneBodies,
    annotate_grasps,
    check_collisions,
    check_reachable,
    element_pose,
    feasibility_matrix,
    goal_element_pose,
    grasp_feasibility,
    obb_overlap,
    reachable_mask,
    segment_box_distance,
    segment_segment_distance,
    shared_grasps,
    world_grasps,
)

coord = st.floats(-300.0, 300.0, allow_nan=False)
point = st.tuples(coord, coord, coord)
half = st.tuples(st.floats(1.0, 120.0), st.floats(1.0, 120.0), st.floats(1.0, 120.0))
quat = st.tuples(*[st.floats(-1, 1)] * 4).filter(lambda q: np.linalg.norm(q) > 0.1)


def _arm(**kw):
    base = dict(name=ArmName.LEFT, shoulder=(0.0, 0.0, 0.0), reach_min=100.0, reach_max=500.0,
                cone_half_angle=math.radians(60.0))
    base.update(kw)
    return ArmSpec(**base)


def test_annotation_gives_24_grasps_every_30_degrees():
    g = annotate_grasps(k=24)
    assert len(g) == 24
    assert sorted(x.approach_index for x in g) == list(range(24))
    z = np.array([x.element_local_transform.matrix[:, 2] for x in g])
    assert np.allclose(z[:, 0], 0.0, atol=1e-12)  # perpendicular to the cylinder axis
    phis = np.degrees(np.arctan2(z[::2, 2], z[::2, 1])) % 360
    assert np.allclose(np.diff(phis), 30.0)
    assert np.allclose(z[::2], z[1::2])  # two wrist flips per approach
    y = np.array([x.element_local_transform.matrix[:, 1] for x in g])
    assert np.allclose(np.abs(y[:, 0]), 1.0)


def test_invalidated_element_cannot_be_annotated():
    e = CylinderElement((0, 0, 0), (0, 0, 30), 6.0, valid=False)
    with pytest.raises(ValueError):
        annotate_grasps(e)


@given(point, quat)
def test_grasps_are_element_local(pos, q):
    pose = Pose3(pos, q)
    grasps = annotate_grasps()
    ps, Rs = world_grasps(pose, grasps)
    R = pose.matrix
    for g, p, Rw in zip(grasps, ps, Rs):
        assert np.allclose(R.T @ (p - pose.pos), g.element_local_transform.pos, atol=1e-9)
        assert np.allclose(R.T @ Rw, g.element_local_transform.matrix, atol=1e-9)


def test_element_pose_x_axis_follows_cylinder():
    e = CylinderElement((0, 0, 100), (30, 0, 60), 6.0)
    R = element_pose(e).matrix
    assert np.allclose(R[:, 0], np.array([30, 0, -40]) / 50.0)


def test_reachability_boundaries():
    arm = _arm()
    out = np.array([1.0, 0.0, 0.0])
    assert check_reachable(arm, Pose3.from_matrix((300, 0, 50), _frame(out)))
    assert not check_reachable(arm, Pose3.from_matrix((300, 0, 50), _frame(-out)))
    assert not check_reachable(arm, Pose3.from_matrix((50, 0, 50), _frame(out)))
    assert not check_reachable(arm, Pose3.from_matrix((600, 0, 50), _frame(out)))
    assert reachable_mask(arm, [(100, 0, 0), (500, 0, 0)], [out, out]).all()
    assert not reachable_mask(arm, (300, 0, -1), out)[0]
    # cone edge: 60 degrees reachable, a bit beyond is not
    tilt = lambda deg: (math.cos(math.radians(deg)), 0.0, math.sin(math.radians(deg)))
    assert reachable_mask(arm, (300, 0, 0), tilt(59.9))[0]
    assert not reachable_mask(arm, (300, 0, 0), tilt(60.1))[0]


def _frame(z):
    z = np.asarray(z, float) / np.linalg.norm(z)
    x = np.cross([0.0, 1.0, 0.0], z)
    if np.linalg.norm(x) < 1e-9:
        x = np.array([1.0, 0.0, 0.0])
    x /= np.linalg.norm(x)
    return np.column_stack([x, np.cross(z, x), z])


def test_collision_examples():
    arm = _arm(shoulder=(0.0, 0.0, 300.0))
    plate = Box((300.0, 0.0, 50.0), (100.0, 100.0, 50.0), name="plate")
    scene = SceneBodies(0.0, plate)
    down = _frame((0, 0, -1))
    assert check_collisions(arm, Pose3.from_matrix((300, 0, 60), down), scene).blocking_body is BlockingBody.PLATE
    free = check_collisions(arm, Pose3.from_matrix((300, 0, 250), down), scene)
    assert free.collision_free and free.blocking_body is None
    # the gripper body trails the grasp point, so an upward approach near the table sinks into it
    low = check_collisions(arm, Pose3.from_matrix((-300, 0, 20), _frame((0, 0, 1))), scene)
    assert low.blocking_body is BlockingBody.TABLE
    other = SceneBodies(0.0, None, other_arm=(Segment((300, -200, 250), (300, 200, 250)),))
    assert check_collisions(arm, Pose3.from_matrix((300, 0, 250), down), other).blocking_body is BlockingBody.OTHER_ARM


@given(point, point, point, half, quat)
def test_segment_box_distance_matches_sampling(a, b, c, h, q):
    axes = Pose3((0, 0, 0), q).matrix.T
    got = float(segment_box_distance(a, b, c, h, axes)[0])
    ref = O.segment_box_distance(a, b, c, h, axes)
    L = float(np.linalg.norm(np.subtract(b, a)))
    assert got <= ref + 1e-6
    assert got >= ref - L / 4000 - 1e-6


@given(point, point, point, point)
def test_segment_segment_distance_matches_sampling(p1, q1, p2, q2):
    got = float(segment_segment_distance(p1, q1, p2, q2))
    ref = O.segment_segment_distance(p1, q1, p2, q2)
    L = np.linalg.norm(np.subtract(q1, p1)) + np.linalg.norm(np.subtract(q2, p2))
    assert got <= ref + 1e-6
    assert got >= ref - L / 800 - 1e-6


@given(point, half, quat, point, half, quat)
def test_box_overlap_is_consistent_with_sampling(c1, h1, q1, c2, h2, q2):
    a1 = Pose3((0, 0, 0), q1).matrix.T
    a2 = Pose3((0, 0, 0), q2).matrix.T
    sat = bool(obb_overlap(c1, h1, a1, c2, h2, a2))
    if O.boxes_overlap_by_sampling(c1, h1, a1, c2, h2, a2) or O.boxes_overlap_by_sampling(c2, h2, a2, c1, h1, a1):
        assert sat
    gap = np.linalg.norm(np.subtract(c1, c2)) - np.linalg.norm(h1) - np.linalg.norm(h2)
    if gap > 0:
        assert not sat


def _lift_scene(obstacle=False):
    sc = make_scenario("acrylic", obstacle=obstacle)
    s = initial_state(sc)
    scene = SceneBodies(sc.table_height, plate_box(s), sc.obstacles)
    return sc, s, scene


@pytest.mark.parametrize("arm_name", [ArmName.LEFT, ArmName.RIGHT])
def test_shared_grasps_match_brute_force(arm_name):
    sc, s, scene = _lift_scene(obstacle=True)
    arm = sc.arm(arm_name)
    pin = np.asarray(sc.rope.pin_point)
    rng = np.random.default_rng(3)
    sel = select_init_element(s.rope, arm, scene)
    init = sel.rope.elements[sel.index]
    grasps = annotate_grasps(init)
    at_init = grasp_feasibility(arm, element_pose(init), grasps, scene)
    checked = 0
    for _ in range(25):
        goal = pin + rng.uniform([-450, -100, -450], [150, 450, -50])
        gp = goal_element_pose(pin, goal)
        expected = []
        for g in grasps:
            ok = True
            for pose in (element_pose(init), gp):
                R = pose.matrix @ g.element_local_transform.matrix
                wp = Pose3.from_matrix(pose.pos + pose.matrix @ g.element_local_transform.pos, R)
                ok &= check_reachable(arm, wp, scene.table_height) and bool(check_collisions(arm, wp, scene).collision_free)
            if ok:
                expected.append(g.approach_index)
        try:
            got = shared_grasps(init, gp, arm, scene, init_feasibility=at_init)
        except NoInitialGrasp:
            assert not any(f.feasible for f in at_init)
            continue
        assert [g.approach_index for g in got.members] == expected
        assert got.n_goal == len(expected)
        checked += len(expected)
    assert checked > 0


def test_removing_an_obstacle_never_removes_feasible_grasps():
    sc, s, scene = _lift_scene(obstacle=True)
    pin = np.asarray(sc.rope.pin_point)
    rng = np.random.default_rng(5)
    poses = [goal_element_pose(pin, pin + rng.uniform([-450, -100, -450], [150, 450, -50])) for _ in range(300)]
    grasps = annotate_grasps()
    for arm in sc.arms:
        with_obs = feasibility_matrix(arm, poses, grasps, scene)
        without = feasibility_matrix(arm, poses, grasps, scene.without_obstacle(0))
        assert (without | ~with_obs).all()
        if arm.name is ArmName.RIGHT:
            assert without.sum() > with_obs.sum()


def test_feasibility_matrix_agrees_with_per_pose_checks():
    sc, s, scene = _lift_scene(obstacle=True)
    pin = np.asarray(sc.rope.pin_point)
    rng = np.random.default_rng(9)
    poses = [goal_element_pose(pin, pin + rng.uniform([-450, -100, -450], [150, 450, -50])) for _ in range(30)]
    grasps = annotate_grasps()
    arm = sc.arm(ArmName.RIGHT)
    M = feasibility_matrix(arm, poses, grasps, scene)
    for i, p in enumerate(poses):
        assert [f.feasible for f in grasp_feasibility(arm, p, grasps, scene)] == M[i].tolist()


def test_element_inside_a_bulky_plate_is_blocked_by_the_plate():
    arm = _arm(shoulder=(0.0, 0.0, 400.0), reach_max=900.0, cone_half_angle=math.pi)
    plate = Box((300.0, 0.0, 150.0), (200.0, 200.0, 150.0), name="plate")
    scene = SceneBodies(0.0, plate)
    e = CylinderElement((300, 0, 170), (300, 0, 140), 6.0)
    feas = grasp_feasibility(arm, element_pose(e), annotate_grasps(e), scene)
    assert all(f.reachable for f in feas)
    assert all(f.blocking_body is BlockingBody.PLATE for f in feas)
    with pytest.raises(NoInitialGrasp):
        shared_grasps(e, element_pose(e), arm, scene)


def test_identity_goal_keeps_every_initially_feasible_grasp():
    sc, s, scene = _lift_scene()
    arm = sc.arm(ArmName.RIGHT)
    sel = select_init_element(s.rope, arm, scene)
    init = sel.rope.elements[sel.index]
    got = shared_grasps(init, element_pose(init), arm, scene, init_feasibility=sel.feasibility)
    assert got.n_goal == got.n_init == sum(f.feasible for f in sel.feasibility)
    assert [g.approach_index for g in got.members] == [f.grasp.approach_index for f in sel.feasibility if f.feasible]


def test_goal_out_of_reach_gives_an_empty_shared_set():
    sc, s, scene = _lift_scene()
    arm = sc.arm(ArmName.RIGHT)
    sel = select_init_element(s.rope, arm, scene)
    init = sel.rope.elements[sel.index]
    far = goal_element_pose(sc.rope.pin_point, np.asarray(arm.shoulder) + [0.0, -(arm.reach_max + 1.0), 0.0])
    got = shared_grasps(init, far, arm, scene, init_feasibility=sel.feasibility)
    assert got.n_goal == 0 and got.members == ()
    assert got.n_init > 0


def test_distance_one_past_reach_is_unreachable():
    arm = _arm()
    out = np.array([1.0, 0.0, 0.0])
    assert not reachable_mask(arm, (arm.reach_max + 1.0, 0.0, 10.0), out)[0]
    assert reachable_mask(arm, (arm.reach_max - 1.0, 0.0, 10.0), out)[0]
