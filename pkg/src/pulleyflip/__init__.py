"""Dual-arm lifting of heavy plates with crane pulley blocks, and push tumbling."""

from .core_types import (
    ArmName,
    ArmSpec,
    Box,
    CylinderElement,
    Pose2,
    Pose3,
    PlateSpec,
    RopeState,
    Scenario,
    Segment,
    TumbleParams,
    validate_scenario,
)
from .errors import PlannerError, ScenarioError
from .lift_controller import run_lift_loop
from .pipeline import build_report, run_episode
from .scenarios import make_scenario
from .sim import SimHandle
from .tumble_planner import check_kinematics_and_repair, plan_rope_return, plan_tumble

__version__ = "0.1.0"

__all__ = [
    "ArmName", "ArmSpec", "Box", "CylinderElement", "Pose2", "Pose3", "PlateSpec", "RopeState", "Scenario",
    "Segment", "TumbleParams", "validate_scenario", "PlannerError", "ScenarioError", "run_lift_loop",
    "build_report", "run_episode", "make_scenario", "SimHandle", "check_kinematics_and_repair",
    "plan_rope_return", "plan_tumble",
]
