"""Deterministic quasi-static world used in place of vision and hardware.

The load side of the rope runs straight from the upper pulley pin to the
hook.  Pulling ``d`` millimetres on the pull side shortens that span by
``d / pulley_ratio`` and the plate settles at the tilt where the hook sits at
the new distance from the pin.  The pull side is re-draped as a taut segment
from the pin to the hand followed by rope hanging straight down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

from .core_types import (
    GRAVITY,
    CylinderElement,
    PlateSpec,
    Pose2,
    RopeState,
    Scenario,
    rot2,
    vec3,
)
from .errors import OverLift
from .geometry import EdgeContactModel, default_edges, plate_point, plate_pose_at

TILT_TOL = 1e-12
FLAT_TILT = math.radians(1.0)
LIFT_LIMIT = math.pi / 2 - 1e-6


class Phase(str, Enum):
    LIFTING = "Lifting"
    TUMBLING = "Tumbling"
    RETURNING = "Returning"
    DONE = "Done"


@dataclass(frozen=True)
class ForceProxy:
    rope_tension_at_hand: float
    rope_tilt_theta: float


@dataclass(frozen=True)
class SimState:
    """Value snapshot of the simulated scene.

    ``rotation`` is measured from the initial flat pose about the contact
    edges; ``plate_tilt`` is the angle between the plate and the table on the
    side it currently leans towards (equal to ``rotation`` before tumbling).
    ``load_length`` is the rope span from pin to hook.
    """

    plate: PlateSpec
    rope: RopeState
    table_height: float
    plate_pose: Pose2
    rotation: float
    plate_tilt: float
    phase: Phase
    pulled_total: float
    load_length: float
    initial_load_length: float
    active_edge: int = 0
    rope_held: bool = True
    fed_total: float = 0.0

    @property
    def pin2(self) -> np.ndarray:
        p = self.rope.pin_point
        return np.array([p[0], p[2] - self.table_height])

    @property
    def hook_height(self) -> float:
        return float(self.rope.hook_point[2])


def hook_position(plate: PlateSpec, rotation: float, edges: Optional[EdgeContactModel] = None) -> np.ndarray:
    edges = edges or default_edges(plate)
    return plate_point(plate, edges, rotation, plate.hook)


def hook_pin_distance(plate: PlateSpec, pin2, rotation: float) -> float:
    return float(np.linalg.norm(hook_position(plate, rotation) - np.asarray(pin2)))


def _bisect(f, lo: float, hi: float, tol: float = TILT_TOL) -> float:
    flo = f(lo)
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def lift_tilt_for_length(plate: PlateSpec, pin2, length: float, lo: float = 0.0) -> float:
    """Tilt in ``[lo, LIFT_LIMIT]`` at which the hook is ``length`` from the pin."""
    f = lambda a: hook_pin_distance(plate, pin2, a) - length
    if f(lo) <= 0:
        return lo
    if f(LIFT_LIMIT) > 0:
        raise OverLift("requested rope span needs a tilt beyond vertical", length=length)
    return _bisect(f, lo, LIFT_LIMIT)


def drape_rope(
    pin,
    hand,
    free_length: float,
    element_length: float,
    radius: float,
    table_height: float,
) -> tuple[CylinderElement, ...]:
    """Chain of equal-chord elements along pin -> hand -> straight down.

    Elements that would reach below the table are dropped, as is any rope
    beyond ``free_length``.
    """
    pin = np.asarray(pin, dtype=float)
    pts = [pin]
    if hand is not None:
        hand = np.asarray(hand, dtype=float)
        if np.linalg.norm(hand - pin) > 1e-9:
            pts.append(hand)
    last = pts[-1]
    pts.append(np.array([last[0], last[1], table_height]))
    poly = [pts[0]]
    for p in pts[1:]:
        if np.linalg.norm(p - poly[-1]) > 1e-9:
            poly.append(p)
    seg_len = [float(np.linalg.norm(b - a)) for a, b in zip(poly[:-1], poly[1:])]

    elements = []
    cur = poly[0]
    seg = 0
    used = 0.0
    L = element_length
    while seg < len(seg_len) and used + L <= free_length + 1e-9:
        nxt = None
        k = seg
        while k < len(seg_len):
            a, b = poly[k], poly[k + 1]
            d = b - a
            dd = d @ d
            f = a - cur
            # |a + t d - cur| = L, largest root with t in [0, 1]
            bq = 2 * (f @ d)
            cq = f @ f - L * L
            disc = bq * bq - 4 * dd * cq
            if disc >= 0:
                t = (-bq + math.sqrt(disc)) / (2 * dd)
                t_lo = 0.0
                if k == seg:
                    t_lo = float(np.clip(((cur - a) @ d) / dd, 0.0, 1.0))
                if t_lo - 1e-12 <= t <= 1.0 + 1e-12:
                    nxt = a + min(max(t, 0.0), 1.0) * d
                    break
            k += 1
        if nxt is None:
            break
        # snap to exact length to keep the chain invariant tight
        v = nxt - cur
        nxt = cur + v * (L / np.linalg.norm(v))
        elements.append(CylinderElement(vec3(cur), vec3(nxt), radius))
        used += L
        cur = nxt
        seg = k
    return tuple(elements)


def initial_state(scenario: Scenario) -> SimState:
    plate = scenario.plate
    rope = scenario.rope
    th = scenario.table_height
    pin2 = np.array([rope.pin_point[0], rope.pin_point[2] - th])
    L0 = hook_pin_distance(plate, pin2, 0.0)
    pose, _ = plate_pose_at(0.0, plate, default_edges(plate))
    hook = _hook3(plate, 0.0, th)
    rope = replace(rope, hook_point=hook, total_pulled=0.0)
    return SimState(plate, rope, th, pose, 0.0, 0.0, Phase.LIFTING, 0.0, L0, L0)


def _hook3(plate: PlateSpec, rotation: float, table_height: float):
    p = hook_position(plate, rotation)
    return (float(p[0]), 0.0, float(p[1] + table_height))


def apply_pull(state: SimState, d: float, hand=None) -> SimState:
    """Draw ``d`` mm of rope through the pin and settle the plate."""
    if state.phase is not Phase.LIFTING:
        raise ValueError("apply_pull needs the Lifting phase")
    if d < 0:
        raise ValueError("pull length must be nonnegative")
    if d == 0:
        return state
    rope = state.rope
    target = state.load_length - d / rope.pulley_ratio
    tilt = lift_tilt_for_length(state.plate, state.pin2, target, lo=state.rotation)
    pulled = state.pulled_total + d
    free = rope.free_length + d
    elements = drape_rope(
        rope.pin_point, hand, free, rope.element_length, rope.element_radius, state.table_height
    )
    rope = replace(
        rope,
        elements=elements,
        hook_point=_hook3(state.plate, tilt, state.table_height),
        total_pulled=pulled,
        free_length=free,
    )
    pose, edge = plate_pose_at(tilt, state.plate, default_edges(state.plate))
    return replace(
        state,
        rope=rope,
        plate_pose=pose,
        rotation=tilt,
        plate_tilt=tilt,
        pulled_total=pulled,
        load_length=target,
        active_edge=edge,
    )


def hook_rise(state: SimState) -> float:
    """Shortening of the pin-to-hook span since the start of the lift."""
    return state.initial_load_length - hook_pin_distance(state.plate, state.pin2, state.rotation)


def hand_force_proxy(state: SimState, goal_point, force_cap: float = 200.0) -> ForceProxy:
    pin = np.asarray(state.rope.pin_point)
    v = np.asarray(goal_point, dtype=float) - pin
    n = np.linalg.norm(v)
    cos_t = float(np.clip(-v[2] / n, -1.0, 1.0)) if n > 0 else 1.0
    theta = math.acos(max(cos_t, 0.0))
    base = state.plate.m * GRAVITY / state.rope.pulley_ratio
    tension = force_cap if cos_t <= 0 else min(force_cap, base / cos_t)
    return ForceProxy(tension, theta)


def start_tumbling(state: SimState) -> SimState:
    if state.phase is not Phase.LIFTING:
        raise ValueError("tumbling starts from the Lifting phase")
    return replace(state, phase=Phase.TUMBLING)


def apply_tumble_step(state: SimState, step) -> SimState:
    """Move the plate to the rotation of a planned push step."""
    if state.phase is not Phase.TUMBLING:
        raise ValueError("apply_tumble_step needs the Tumbling phase")
    rot = float(step.plate_rotation)
    if rot < state.rotation - 1e-12:
        raise ValueError("tumble steps must not rotate the plate backwards")
    held = getattr(step.state_kind, "value", step.state_kind) == "S"
    if rot == state.rotation and held == state.rope_held:
        return state
    pose, edge = plate_pose_at(rot, state.plate, default_edges(state.plate))
    rope = replace(state.rope, hook_point=_hook3(state.plate, rot, state.table_height))
    load, pulled = state.load_length, state.pulled_total
    if held:
        # the holding hand takes in the slack so the rope is taut again
        load = min(load, hook_pin_distance(state.plate, state.pin2, rot))
        taken = (state.load_length - load) * rope.pulley_ratio
        pulled += taken
        rope = replace(rope, total_pulled=rope.total_pulled + taken, free_length=rope.free_length + taken)
    return replace(
        state,
        rope=rope,
        plate_pose=pose,
        rotation=rot,
        plate_tilt=rot if rot <= math.pi / 2 else math.pi - rot,
        active_edge=edge,
        rope_held=held,
        load_length=load,
        pulled_total=pulled,
    )


def _settle_after_tip(plate: PlateSpec, pin2, length: float, lo: float) -> float:
    """Rotation in [lo, pi] where the falling plate is caught by the rope."""
    grid = np.linspace(lo, math.pi, 2001)
    dist = np.array([hook_pin_distance(plate, pin2, t) for t in grid])
    k_min = int(np.argmin(dist))
    if length >= dist[-1]:
        return math.pi
    if length <= dist[k_min]:
        return float(grid[k_min])
    idx = k_min + int(np.argmax(dist[k_min:] >= length))
    a, b = grid[idx - 1], grid[idx]
    return _bisect(lambda t: hook_pin_distance(plate, pin2, t) - length, a, b)


def start_return(state: SimState) -> SimState:
    """Let the plate fall past the tip until the rope span holds it."""
    if state.phase is not Phase.TUMBLING:
        raise ValueError("the return starts from the Tumbling phase")
    rot = _settle_after_tip(state.plate, state.pin2, state.load_length, state.rotation)
    return _returning_pose(state, rot, state.fed_total)


def _returning_pose(state: SimState, rot: float, fed: float) -> SimState:
    pose, edge = plate_pose_at(rot, state.plate, default_edges(state.plate))
    tilt = math.pi - rot
    phase = Phase.DONE if tilt <= FLAT_TILT else Phase.RETURNING
    rope = replace(state.rope, hook_point=_hook3(state.plate, rot, state.table_height))
    return replace(
        state,
        rope=rope,
        plate_pose=pose,
        rotation=rot,
        plate_tilt=tilt,
        phase=phase,
        active_edge=edge,
        fed_total=fed,
        rope_held=True,
    )


def apply_return(state: SimState, fed_length: float) -> SimState:
    """Feed rope back through the pin and lower the plate on the far side."""
    if state.phase not in (Phase.RETURNING, Phase.DONE):
        raise ValueError("apply_return needs the Returning phase")
    if fed_length < 0:
        raise ValueError("fed length must be nonnegative")
    if fed_length == 0:
        return state
    rope = state.rope
    length = state.load_length + fed_length / rope.pulley_ratio
    rot = _settle_after_tip(state.plate, state.pin2, length, state.rotation)
    rot = max(rot, state.rotation)
    free = rope.free_length - fed_length
    elements = drape_rope(
        rope.pin_point, None, free, rope.element_length, rope.element_radius, state.table_height
    )
    state = replace(
        state,
        load_length=length,
        pulled_total=state.pulled_total - fed_length,
        rope=replace(rope, elements=elements, free_length=free, total_pulled=rope.total_pulled - fed_length),
    )
    return _returning_pose(state, rot, state.fed_total + fed_length)


def plate_box(state: SimState):
    """World oriented box occupied by the plate."""
    from .core_types import Box

    plate = state.plate
    c2 = plate_point(plate, default_edges(plate), state.rotation, (plate.h / 2, plate.w / 2))
    R = rot2(state.rotation)
    u = R @ np.array([1.0, 0.0])
    v = R @ np.array([0.0, 1.0])
    axes = ((u[0], 0.0, u[1]), (0.0, 1.0, 0.0), (v[0], 0.0, v[1]))
    center = (c2[0], 0.0, c2[1] + state.table_height)
    return Box(center, (plate.h / 2, plate.l / 2, plate.w / 2), axes, name="plate")


SNAPSHOT_COLUMNS = ("event", "phase", "tilt_deg", "pulled_total_mm", "hook_height_mm")


class SimHandle:
    """Mutable owner of the current :class:`SimState` plus its event log.

    Controllers talk to the world only through this handle; every transition
    appends one snapshot row.
    """

    def __init__(self, state: SimState):
        self.state = state
        self.log: list[tuple] = []
        self._snap("init")

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "SimHandle":
        return cls(initial_state(scenario))

    def _snap(self, event: str) -> None:
        s = self.state
        self.log.append(
            (event, s.phase.value, math.degrees(s.plate_tilt), s.pulled_total, s.hook_height - s.table_height)
        )

    @property
    def tilt(self) -> float:
        return self.state.plate_tilt

    def pull(self, d: float, hand=None) -> SimState:
        self.state = apply_pull(self.state, d, hand)
        self._snap("pull")
        return self.state

    def begin_tumbling(self) -> SimState:
        self.state = start_tumbling(self.state)
        self._snap("tumble_start")
        return self.state

    def tumble(self, step) -> SimState:
        self.state = apply_tumble_step(self.state, step)
        self._snap("tumble_step")
        return self.state

    def begin_return(self) -> SimState:
        self.state = start_return(self.state)
        self._snap("return_start")
        return self.state

    def feed(self, fed_length: float) -> SimState:
        self.state = apply_return(self.state, fed_length)
        self._snap("return")
        return self.state
