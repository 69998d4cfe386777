"""Built-in desk-scale scenarios for the three reference plates.

The robot stands beside the plate, past its far end in ``+y``, facing ``-y``.
The right arm works on the side the plate tumbles towards (``-x``); the left
arm is on the plate side and also does the pushing.  The upper pulley pin sits
behind the first contact edge at a fixed polar angle, so the hanging rope
is clear of the plate while it is lifted.
"""

from __future__ import annotations

import math

import numpy as np

from .core_types import ArmName, ArmSpec, Box, PlateSpec, RopeState, Scenario, Segment, TumbleParams
from .sim import drape_rope

PIN_POLAR_ANGLE = math.radians(110.0)
PIN_DISTANCE_RATIO = 1.22
PULLEY_RATIO = 6.0
STAND_GAP = 120.0
PUSH_MARGIN = 10.0  # push plane inset from the plate end nearest the robot

PLATES = {
    "acrylic": PlateSpec(300.0, 300.0, 40.0, 4.0, (150.0, 20.0), (300.0, 0.0), 0.5, 0.4, "acrylic"),
    "stainless": PlateSpec(300.0, 400.0, 150.0, 6.0, (150.0, 75.0), (300.0, 0.0), 0.4, 0.1, "stainless"),
    "plywood": PlateSpec(500.0, 400.0, 44.0, 6.4, (250.0, 22.0), (500.0, 0.0), 0.6, 0.3, "plywood"),
}

# the stainless box would topple by itself above ~63 degrees, so its lift stops earlier
LIFT_THRESHOLDS = {"acrylic": math.radians(70.0), "stainless": math.radians(55.0), "plywood": math.radians(70.0)}


def pin_point(plate: PlateSpec, table_height: float = 0.0) -> tuple:
    D = PIN_DISTANCE_RATIO * plate.h
    return (D * math.cos(PIN_POLAR_ANGLE), 0.0, table_height + D * math.sin(PIN_POLAR_ANGLE))


def initial_rope(plate: PlateSpec, table_height: float = 0.0, ratio: float = PULLEY_RATIO,
                 element_length: float = 30.0, radius: float = 6.0) -> RopeState:
    """Pull side hanging straight down from the pin to the table."""
    pin = pin_point(plate, table_height)
    free = pin[2] - table_height
    elements = drape_rope(pin, None, free, element_length, radius, table_height)
    hook = (plate.hook[0], 0.0, table_height + plate.hook[1])
    return RopeState(pin, elements, hook, ratio, 0.0, element_length, radius, free)


ARM_LAYOUT = {
    "reach": (150.0, 550.0),
    "right_shoulder": (-250.0, 450.0),  # x offset from the pin, height
    "left_shoulder": (260.0, 260.0),  # x, height
    "cone_deg": 60.0,
}

# the stainless box needs an upward push before it tips, reached from a lower shoulder
PLATE_LAYOUTS = {"stainless": {"left_shoulder": (300.0, 120.0)}}


def default_arms(plate: PlateSpec, table_height: float = 0.0, layout: dict = ARM_LAYOUT) -> tuple[ArmSpec, ArmSpec]:
    pin = np.asarray(pin_point(plate, table_height))
    y = plate.l / 2 + STAND_GAP
    r_min, r_max = layout["reach"]
    cone = math.radians(layout["cone_deg"])
    torso = Segment((0.0, y + 150.0, table_height), (0.0, y + 150.0, table_height + 700.0))
    dx, zr = layout["right_shoulder"]
    xl, zl = layout["left_shoulder"]
    right_sh = (pin[0] + dx, y, table_height + zr)
    left_sh = (xl, y, table_height + zl)
    right = ArmSpec(
        ArmName.RIGHT, right_sh, r_min, r_max, (torso,), cone_half_angle=cone,
        park_point=(right_sh[0] - 100.0, y + 100.0, right_sh[2] - 150.0),
    )
    left = ArmSpec(
        ArmName.LEFT, left_sh, r_min, r_max, (torso,), cone_half_angle=cone,
        park_point=(left_sh[0] + 100.0, y + 100.0, left_sh[2] - 150.0),
    )
    return left, right


def obstacle_box(plate: PlateSpec, table_height: float = 0.0) -> Box:
    """Block in the middle of the right arm's goal region."""
    pin = pin_point(plate, table_height)
    return Box((pin[0] - 150.0, 120.0, table_height + 150.0), (60.0, 60.0, 150.0), name="obstacle")


def make_scenario(name: str = "acrylic", weights=(1.0, 1.0, 1.0), seed: int = 0,
                  obstacle: bool = False, **overrides) -> Scenario:
    plate = PLATES[name]
    layout = {**ARM_LAYOUT, **PLATE_LAYOUTS.get(name, {})}
    sc = Scenario(
        plate=plate,
        arms=default_arms(plate, layout=layout),
        rope=initial_rope(plate),
        alpha_thld=LIFT_THRESHOLDS[name],
        quality_weights=tuple(weights),
        rng_seed=seed,
        scenario_id=name + ("_obstacle" if obstacle else ""),
        obstacles=(obstacle_box(plate),) if obstacle else (),
        tumble_params=TumbleParams(),
        push_plane_y=plate.l / 2 - PUSH_MARGIN,
    )
    return sc.with_(**overrides) if overrides else sc
