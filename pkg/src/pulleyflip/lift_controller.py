"""Closed-loop lifting with two arms taking turns on the rope.

Each loop the active arm picks the topmost graspable rope element, scores
sampled goals, and pulls along a straight line.  Before executing, the next
tilt is extrapolated from the last two measurements; when the extrapolation
overshoots the threshold the pull is shortened in proportion.  A failed plan
makes the arm re-grip and hand over to the other arm; a collision with the
idle arm first parks that arm and retries.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .core_types import ArmName, Scenario, Segment
from .errors import (
    InsufficientHistory,
    LiftFailed,
    MotionPlanFailed,
    NoFeasiblePair,
    NoInitialGrasp,
    NoInitialPose,
    StalledLift,
)
from .pull_planner import plan_pull, sample_goals, select_best_pair, select_init_element
from .sim import SimHandle, hand_force_proxy, plate_box
from .workspace import SceneBodies


class FailureCause(str, Enum):
    NO_INITIAL_POSE = "NoInitialPose"
    NO_FEASIBLE_PAIR = "NoFeasiblePair"
    MOTION_PLAN_FAILED = "MotionPlanFailed"
    MOVED_OTHER_ARM = "PlateCollisionResolvedByMovingOtherArm"
    REGRIP = "ReGrip"


@dataclass(frozen=True)
class FailureRecord:
    loop: int
    arm: ArmName
    cause: FailureCause


@dataclass
class LiftLoopState:
    alpha_history: list
    d_history: list
    active_arm: ArmName
    alpha_thld: float
    loop_count: int = 0
    failures: list = field(default_factory=list)


@dataclass(frozen=True)
class PullRecord:
    loop: int
    arm: ArmName
    distance: float
    alpha_before: float
    alpha_after: float
    predicted: Optional[float]
    shortened: bool
    Q: float
    f: tuple
    theta: float
    force: float
    planning_time: float
    goal: tuple


@dataclass(frozen=True)
class LoopEvent:
    loop: int
    arm: ArmName
    outcome: str
    d: float
    alpha_before: float
    alpha_after: float
    Q: float
    f: tuple
    theta: float
    force: float


@dataclass
class LiftResult:
    state: LiftLoopState
    pulls: list
    events: list
    final_tilt: float


def predict_tilt(alpha_prev: float, alpha_cur: float, d_prev: float, d_cur: float) -> float:
    """Linear extrapolation of the next tilt from the last pull's effect."""
    if not d_prev > 0:
        raise InsufficientHistory("previous pull length must be positive")
    return alpha_cur + (alpha_cur - alpha_prev) * d_cur / d_prev


def adjust_pull_length(alpha_thld: float, alpha_cur: float, alpha_prev: float, d_prev: float) -> float:
    """Pull length that the same linear model expects to land on the threshold."""
    if alpha_cur <= alpha_prev:
        raise StalledLift("tilt did not increase on the last pull")
    return d_prev * (alpha_thld - alpha_cur) / (alpha_cur - alpha_prev)


def measure_tilt(sim_handle: SimHandle, noise_sigma: float, rng: np.random.Generator) -> float:
    """Simulator tilt plus Gaussian noise, clamped to [0, pi/2]."""
    a = sim_handle.tilt
    if noise_sigma > 0:
        a += rng.normal(0.0, noise_sigma)
    return float(min(max(a, 0.0), math.pi / 2))


def bootstrap_length(scenario: Scenario, arm) -> float:
    return min(scenario.bootstrap_pull, (arm.reach_max - arm.reach_min) / 4)


def _idle_segments(scenario: Scenario, arm_name: ArmName, hands: dict) -> tuple:
    other = scenario.arm(arm_name.other)
    hand = hands.get(other.name)
    if hand is None:
        return ()
    return (Segment(other.shoulder, hand),)


def _scene(scenario: Scenario, sim: SimHandle, arm_name: ArmName, hands: dict) -> SceneBodies:
    other = scenario.arm(arm_name.other)
    return SceneBodies(
        table_height=scenario.table_height,
        plate=plate_box(sim.state),
        obstacles=scenario.obstacles,
        other_arm=_idle_segments(scenario, arm_name, hands),
        other_radius=other.link_radius,
    )


def run_lift_loop(
    scenario: Scenario,
    sim_handle: SimHandle,
    rng: Optional[np.random.Generator] = None,
    weights=None,
) -> LiftResult:
    """Alternate arms until the measured tilt reaches the threshold."""
    rng = rng if rng is not None else np.random.default_rng(scenario.rng_seed)
    weights = scenario.quality_weights if weights is None else weights
    thld = scenario.alpha_thld
    st = LiftLoopState([measure_tilt(sim_handle, scenario.noise_sigma_angle, rng)], [], scenario.first_arm, thld)
    pulls: list[PullRecord] = []
    events: list[LoopEvent] = []
    hands = {a.name: a.park_point for a in scenario.arms}
    # element invalidations are per arm and last until the rope is re-draped
    ropes = {a.name: sim_handle.state.rope for a in scenario.arms}
    no_pose_streak: set = set()

    def fail(arm, cause, regrip=True):
        st.failures.append(FailureRecord(st.loop_count, arm, cause))
        a = st.alpha_history[-1]
        events.append(LoopEvent(st.loop_count, arm, cause.value, 0.0, a, a, float("nan"), (), float("nan"), float("nan")))
        if regrip:
            st.failures.append(FailureRecord(st.loop_count, arm, FailureCause.REGRIP))

    while st.alpha_history[-1] < thld - scenario.alpha_tol:
        if st.loop_count >= scenario.max_loops:
            raise LiftFailed("loop budget exhausted", loops=st.loop_count)
        st.loop_count += 1
        name = st.active_arm
        arm = scenario.arm(name)
        t0 = time.perf_counter()
        moved_other = False
        while True:
            scene = _scene(scenario, sim_handle, name, hands)
            rope = ropes[name]
            try:
                sel = select_init_element(rope, arm, scene, scenario.grasps_per_element)
                ropes[name] = rope = sel.rope
                samples = sample_goals(arm, rope, scenario.goal_sample_count, rng, scenario.table_height)
                pair = select_best_pair(
                    rope, arm, scene, weights, samples, sel.index, scenario.grasps_per_element, sel.feasibility
                )
                cmd = plan_pull(pair, arm, rope, scene, scenario.sweep_steps)
            except NoInitialPose as exc:
                ropes[name] = exc.details.get("rope", rope)
                fail(name, FailureCause.NO_INITIAL_POSE, regrip=False)
                no_pose_streak.add(name)
                if no_pose_streak == {ArmName.LEFT, ArmName.RIGHT}:
                    raise LiftFailed("neither arm can find an initial pose", loops=st.loop_count) from exc
                cmd = None
            except (NoFeasiblePair, NoInitialGrasp) as exc:
                fail(name, FailureCause.NO_FEASIBLE_PAIR)
                no_pose_streak.clear()
                cmd = None
            except MotionPlanFailed as exc:
                if exc.details.get("other_arm_only") and not moved_other:
                    hands[name.other] = scenario.arm(name.other).park_point
                    moved_other = True
                    st.failures.append(FailureRecord(st.loop_count, name, FailureCause.MOVED_OTHER_ARM))
                    continue
                fail(name, FailureCause.MOTION_PLAN_FAILED)
                no_pose_streak.clear()
                cmd = None
            break
        if cmd is None:
            st.active_arm = name.other
            continue
        no_pose_streak.clear()

        alpha = st.alpha_history[-1]
        d = cmd.path_length
        shortened = False
        predicted = None
        if st.d_history:
            a_prev = st.alpha_history[-2]
            d_prev = st.d_history[-1]
            if predict_tilt(a_prev, alpha, d_prev, d) > thld:
                try:
                    d_hat = adjust_pull_length(thld, alpha, a_prev, d_prev)
                except StalledLift:
                    fail(name, FailureCause.REGRIP, regrip=False)
                    st.active_arm = name.other
                    continue
                if d_hat < d:
                    d, shortened = max(d_hat, 0.0), True
            predicted = predict_tilt(a_prev, alpha, d_prev, d)
        else:
            boot = bootstrap_length(scenario, arm)
            if d > boot:
                d, shortened = boot, True
        if shortened:
            cmd = cmd.truncated(d)
        plan_time = time.perf_counter() - t0
        goal = cmd.end.position
        sim_handle.pull(d, hand=goal)
        ropes = {a.name: sim_handle.state.rope for a in scenario.arms}
        after = measure_tilt(sim_handle, scenario.noise_sigma_angle, rng)
        force = hand_force_proxy(sim_handle.state, goal, scenario.force_cap)
        st.alpha_history.append(after)
        st.d_history.append(d)
        hands[name] = goal
        f = pair.f
        rec = PullRecord(
            st.loop_count, name, d, alpha, after, predicted, shortened, pair.Q,
            (f.f_length, f.f_load, f.f_grasps), force.rope_tilt_theta, force.rope_tension_at_hand, plan_time, goal,
        )
        pulls.append(rec)
        events.append(
            LoopEvent(st.loop_count, name, "Success", d, alpha, after, pair.Q, rec.f, force.rope_tilt_theta,
                      force.rope_tension_at_hand)
        )
        st.active_arm = name.other
    return LiftResult(st, pulls, events, sim_handle.tilt)


def action_count(result: LiftResult) -> int:
    """Physical arm actions: executed pulls plus re-grips.

    Switching arms because no initial pose exists moves nothing and is not
    counted.
    """
    regrips = sum(1 for f in result.state.failures if f.cause is FailureCause.REGRIP)
    return len(result.pulls) + regrips


EVENT_COLUMNS = (
    "loop", "arm", "outcome", "d_mm", "alpha_before_deg", "alpha_after_deg",
    "Q", "f_length", "f_load", "f_grasps", "theta_deg", "force_N",
)


def event_rows(result: LiftResult) -> list[list]:
    rows = []
    for e in result.events:
        f = list(e.f) if e.f else [float("nan")] * 3
        rows.append(
            [e.loop, e.arm.value, e.outcome, e.d, math.degrees(e.alpha_before), math.degrees(e.alpha_after),
             e.Q, *f, math.degrees(e.theta) if e.theta == e.theta else e.theta, e.force]
        )
    return rows


def write_event_csv(result: LiftResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(EVENT_COLUMNS)
        for row in event_rows(result):
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])
