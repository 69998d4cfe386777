import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pulleyflip import scenario_io
from pulleyflip.core_types import (
    ArmName,
    Box,
    CylinderElement,
    PlateSpec,
    Pose2,
    Pose3,
    RopeState,
    normalize_angle,
    rope_is_contiguous,
    validate_scenario,
)
from pulleyflip.errors import ScenarioError
from pulleyflip.scenarios import PLATES, make_scenario

angles = st.floats(-50.0, 50.0, allow_nan=False)


def test_reference_acrylic_scenario_is_valid():
    sc = make_scenario("acrylic")
    assert sc.plate == PlateSpec(300.0, 300.0, 40.0, 4.0, (150.0, 20.0), (300.0, 0.0), 0.5, 0.4, "acrylic")
    assert validate_scenario(sc).violations == ()


def test_zero_mass_gives_one_violation_about_mass():
    sc = make_scenario("acrylic")
    bad = sc.with_(plate=PlateSpec(300, 300, 40, 0.0, (150, 20), (300, 0), 0.5, 0.4))
    v = validate_scenario(bad).violations
    assert len(v) == 1 and "mass" in v[0]


def test_all_zero_weights_give_one_violation():
    v = validate_scenario(make_scenario("acrylic", weights=(0, 0, 0))).violations
    assert len(v) == 1 and "all-zero" in v[0]


def test_other_violations_are_reported():
    sc = make_scenario("acrylic")
    assert validate_scenario(sc.with_(goal_sample_count=0)).violations
    assert validate_scenario(sc.with_(alpha_thld=math.pi)).violations
    assert validate_scenario(sc.with_(quality_weights=(-1, 1, 1))).violations
    off = PlateSpec(300, 300, 40, 4.0, (500, 20), (300, 0), 0.5, 0.4)
    assert any("com" in x for x in validate_scenario(sc.with_(plate=off)).violations)
    assert any("friction" in x for x in validate_scenario(
        sc.with_(plate=PlateSpec(300, 300, 40, 4.0, (150, 20), (300, 0), 0.0, 0.4))).violations)


@given(angles)
def test_pose2_rotation_normalisation_is_idempotent(a):
    once = normalize_angle(a)
    assert -math.pi < once <= math.pi
    assert normalize_angle(once) == once
    assert Pose2((0.0, 0.0), a).rotation == once


def test_pi_maps_to_pi():
    assert normalize_angle(math.pi) == math.pi
    assert normalize_angle(-math.pi) == math.pi


@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(lambda q: np.linalg.norm(q) > 1e-3))
def test_pose3_quaternion_has_unit_norm(q):
    p = Pose3((1.0, 2.0, 3.0), tuple(q))
    assert abs(np.linalg.norm(p.orientation) - 1.0) < 1e-9
    R = p.matrix
    assert np.allclose(R @ R.T, np.eye(3), atol=1e-9)


def test_zero_quaternion_rejected():
    with pytest.raises(ValueError):
        Pose3((0, 0, 0), (0, 0, 0, 0))


def test_arm_name_other():
    assert ArmName.LEFT.other is ArmName.RIGHT
    assert ArmName.RIGHT.other is ArmName.LEFT


def test_rope_contiguity_detects_gaps_and_unequal_elements():
    a = CylinderElement((0, 0, 100), (0, 0, 70), 6.0)
    b = CylinderElement((0, 0, 70), (0, 0, 40), 6.0)
    rope = RopeState((0, 0, 100), (a, b), (300, 0, 0))
    assert rope_is_contiguous(rope)
    gap = CylinderElement((0, 0, 69), (0, 0, 39), 6.0)
    assert not rope_is_contiguous(RopeState((0, 0, 100), (a, gap), (300, 0, 0)))
    fat = CylinderElement((0, 0, 70), (0, 0, 40), 7.0)
    assert not rope_is_contiguous(RopeState((0, 0, 100), (a, fat), (300, 0, 0)))


@pytest.mark.parametrize("name", sorted(PLATES))
@pytest.mark.parametrize("obstacle", [False, True])
def test_scenario_text_round_trip_is_identity(name, obstacle):
    sc = make_scenario(name, weights=(0.3, 1.0 / 3.0, 2.0), seed=11, obstacle=obstacle)
    back = scenario_io.loads(scenario_io.dumps(sc))
    assert back == sc


@given(
    st.floats(1.0, 1000.0), st.floats(1.0, 100.0), st.floats(0.1, 90.0),
    st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1)).filter(lambda w: sum(w) > 0),
    st.integers(0, 2**31 - 1),
)
def test_round_trip_preserves_random_fields(h, w, thld_deg, weights, seed):
    sc = make_scenario("acrylic", weights=weights, seed=seed)
    plate = PlateSpec(h, 200.0, w, 3.3, (h / 2, w / 2), (h, 0.0), 0.5, 0.4)
    sc = sc.with_(plate=plate, alpha_thld=math.radians(thld_deg), obstacles=(Box((1, 2, 3), (4, 5, 6)),))
    assert scenario_io.loads(scenario_io.dumps(sc)) == sc


def test_malformed_text_raises_scenario_error():
    with pytest.raises(ScenarioError):
        scenario_io.loads("plate: [1, 2")
    with pytest.raises(ScenarioError):
        scenario_io.loads("- just a list")
    with pytest.raises(ScenarioError):
        scenario_io.loads("plate: {h: 1}")
