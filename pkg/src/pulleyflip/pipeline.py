"""One full episode against the simulator: lift, tumble, return.

Also turns an episode into the plain report dictionary written by the
command line tool.  The report holds no wall-clock values, so the same
scenario and seed always serialise to the same bytes; timings are kept in a
separate mapping.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core_types import Scenario, validate_scenario
from .errors import ScenarioError
from .lift_controller import FailureCause, LiftResult, action_count, run_lift_loop
from .sim import SimHandle, hook_rise
from .tumble_planner import (
    TumbleTrajectory,
    check_kinematics_and_repair,
    plan_rope_return,
    plan_tumble,
)


@dataclass
class Episode:
    scenario: Scenario
    seed: int
    lift: LiftResult
    trajectory: Optional[TumbleTrajectory]
    planned: Optional[TumbleTrajectory]
    returns: list
    sim: SimHandle
    pulled_mm: float
    hook_rise_mm: float
    timings: dict = field(default_factory=dict)


def ensure_valid(scenario: Scenario) -> None:
    report = validate_scenario(scenario)
    if not report.ok:
        raise ScenarioError("; ".join(report.violations))


def run_lift(scenario: Scenario, seed: Optional[int] = None):
    """Lift only; returns the result and the simulator handle."""
    seed = scenario.rng_seed if seed is None else seed
    sim = SimHandle.from_scenario(scenario)
    result = run_lift_loop(scenario, sim, np.random.default_rng(seed))
    return result, sim


def run_episode(scenario: Scenario, seed: Optional[int] = None, tumble: bool = True) -> Episode:
    ensure_valid(scenario)
    seed = scenario.rng_seed if seed is None else seed
    timings = {}
    t0 = time.perf_counter()
    lift, sim = run_lift(scenario, seed)
    timings["lift_s"] = time.perf_counter() - t0
    timings["per_pull_s"] = [p.planning_time for p in lift.pulls]
    pulled = sim.state.pulled_total
    rise = hook_rise(sim.state)
    planned = traj = None
    cmds: list = []
    if tumble:
        t0 = time.perf_counter()
        st = sim.state
        planned = plan_tumble(scenario.plate, None, scenario.tumble_params, st.rotation, st.pin2)
        timings["tumble_plan_s"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        traj = check_kinematics_and_repair(
            planned, scenario.arm(scenario.push_arm), table_height=scenario.table_height,
            push_y=scenario.push_plane_y,
        )
        timings["kinematics_s"] = time.perf_counter() - t0
        sim.begin_tumbling()
        for step in traj.steps:
            sim.tumble(step)
        t0 = time.perf_counter()
        holder = scenario.arm(scenario.push_arm.other)
        cmds = plan_rope_return(sim.state.rope, (holder, scenario.arm(scenario.push_arm)), sim.state)
        timings["return_plan_s"] = time.perf_counter() - t0
        sim.begin_return()
        for c in cmds:
            sim.feed(c.path_length)
    return Episode(scenario, seed, lift, traj, planned, cmds, sim, pulled, rise, timings)


def _f(x: float) -> Optional[float]:
    """JSON-safe float: NaN becomes null."""
    return None if x != x else float(x)


def pull_records(lift: LiftResult) -> list[dict]:
    return [
        {
            "loop": p.loop,
            "arm": p.arm.value,
            "distance_mm": float(p.distance),
            "force_N": float(p.force),
            "theta_deg": math.degrees(p.theta),
            "Q": float(p.Q),
            "f_length": float(p.f[0]),
            "f_load": float(p.f[1]),
            "f_grasps": float(p.f[2]),
            "alpha_before_deg": math.degrees(p.alpha_before),
            "alpha_after_deg": math.degrees(p.alpha_after),
            "predicted_deg": None if p.predicted is None else math.degrees(p.predicted),
            "shortened": bool(p.shortened),
            "goal": [float(v) for v in p.goal],
        }
        for p in lift.pulls
    ]


def totals(pulls: list[dict], n_actions: int) -> dict:
    n = len(pulls)
    return {
        "action_count": n_actions,
        "n_pulls": n,
        "mean_distance_mm": sum(p["distance_mm"] for p in pulls) / n if n else None,
        "mean_force_N": sum(p["force_N"] for p in pulls) / n if n else None,
        "total_distance_mm": sum(p["distance_mm"] for p in pulls),
    }


def build_report(ep: Episode) -> dict:
    sc = ep.scenario
    lift = ep.lift
    pulls = pull_records(lift)
    regrips = sum(1 for f in lift.state.failures if f.cause is FailureCause.REGRIP)
    report = {
        "scenario_id": sc.scenario_id,
        "seed": int(ep.seed),
        "weights": [float(w) for w in sc.quality_weights],
        "pulls": pulls,
        "lift": {
            "loops": lift.state.loop_count,
            "n_regrips": regrips,
            "failures": [[f.loop, f.arm.value, f.cause.value] for f in lift.state.failures],
            "final_tilt_deg": math.degrees(lift.final_tilt),
            "threshold_deg": math.degrees(sc.alpha_thld),
            "pulled_mm": float(ep.pulled_mm),
            "hook_rise_mm": float(ep.hook_rise_mm),
            "pulley_ratio": float(sc.rope.pulley_ratio),
        },
        "totals": totals(pulls, action_count(lift)),
        "phase": ep.sim.state.phase.value,
        "final_tilt_deg": math.degrees(ep.sim.state.plate_tilt),
    }
    traj = ep.trajectory
    if traj is not None:
        f1 = [math.hypot(*s.F1) for s in traj.steps]
        changed = [i for i, (a, b) in enumerate(zip(ep.planned.steps, traj.steps)) if a != b]
        report["tumble"] = {
            "n_steps": len(traj.steps),
            "edge_switch_index": traj.edge_switch_index,
            "tip_index": traj.tip_index,
            "start_rotation_deg": math.degrees(traj.start_rotation),
            "max_F1_N": max(f1),
            "fallback_windows": list(traj.fallback_windows),
            "repaired_steps": changed,
        }
        report["return"] = {
            "strokes": [[c.arm.value, float(c.path_length)] for c in ep.returns],
            "fed_mm": float(sum(c.path_length for c in ep.returns)),
        }
    return report


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"
