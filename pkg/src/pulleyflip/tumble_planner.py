"""Force-optimal sliding-push trajectory for tumbling a lifted plate.

At every time instant the plate is in quasi-static equilibrium under its
weight ``G``, the table reaction ``F0`` at the rotation edge, the push ``F1``
of a fingertip sliding along the plate face and the rope tension ``T`` along
the hook-to-pin line.  Held instants (``S``) keep the rope taut, loosened
instants (``SPrime``) force ``T = 0``; the two kinds alternate in half steps.

For a fixed push point ``s`` (distance along the face) and push angle ``psi``
(measured from the face normal) the torque balance leaves one free scalar, the
tension magnitude, and the objective is a convex quadratic in it.  That scalar
is solved in closed form and clipped to the interval allowed by the force
bounds, so the numerical search is only over ``(s, psi)``: a grid followed by
golden-section refinement on each axis.  The speed and direction limits between
consecutive push points turn into exact intervals of ``s``.

When greedy chaining dead-ends inside a rotation window, that window is
replanned on a lattice of push points with a backward viability pass, so that
the forward choice only visits states from which the window can be completed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .core_types import GRAVITY, PlateSpec, RopeState, TumbleParams, cross2, rot2, vec2
from .errors import InfeasibleInstant, TumbleKinematicsFailed
from .geometry import (  # noqa: F401  (re-exported)
    EdgeContactModel,
    active_edge,
    default_edges,
    final_tip_angle,
    gravity_moment,
    plate_point,
    plate_pose_at,
    tip_angle,
)
from .pull_planner import PullCommand
from .workspace import annotate_grasps, goal_element_pose, reachable_mask

EPS = 1e-6
S_MIN = 1e-3
CHAIN_TOL = 1e-9
GRID_S = 300
GRID_PSI = 41
LATTICE_S = 100


class StateKind(str, Enum):
    S = "S"
    SPRIME = "SPrime"


@dataclass(frozen=True)
class StepGeometry:
    """Everything about one instant that does not depend on the push."""

    rotation: float
    edge: int
    pivot: tuple
    face_origin: tuple
    tangent: tuple
    normal: tuple
    r_g: tuple
    r_t: tuple
    rope_dir: tuple
    face_length: float


def step_geometry(plate: PlateSpec, rotation: float, pin, edges: Optional[EdgeContactModel] = None) -> StepGeometry:
    """Pushing face, lever arms and rope direction at ``rotation``.

    The pushing face is the ``v = 0`` face, which contains the first edge and
    faces away from the tumble direction for the whole motion.
    """
    edges = edges or default_edges(plate)
    k = active_edge(rotation, edges)
    pivot = np.asarray(edges.first_edge if k == 0 else edges.second_edge)
    R = rot2(rotation)
    origin = plate_point(plate, edges, rotation, (0.0, 0.0))
    hook = plate_point(plate, edges, rotation, plate.hook)
    com = plate_point(plate, edges, rotation, plate.com)
    e = np.asarray(pin, dtype=float) - hook
    e = e / np.linalg.norm(e)
    return StepGeometry(
        rotation=float(rotation),
        edge=k,
        pivot=vec2(pivot),
        face_origin=vec2(origin),
        tangent=vec2(R @ [1.0, 0.0]),
        normal=vec2(R @ [0.0, 1.0]),
        r_g=vec2(com - pivot),
        r_t=vec2(hook - pivot),
        rope_dir=vec2(e),
        face_length=float(plate.h),
    )


def push_angle_limit(plate: PlateSpec) -> float:
    return math.atan(plate.mu1) - EPS


def evaluate_push(geom: StepGeometry, plate: PlateSpec, params: TumbleParams, s, psi, kind: StateKind):
    """Optimal forces for given push points and angles (broadcasting arrays).

    Returns ``(objective, tension, f1, F0, F1)``; the objective is ``inf``
    where no admissible tension exists.
    """
    s = np.asarray(s, dtype=float)
    psi = np.asarray(psi, dtype=float)
    s, psi = np.broadcast_arrays(s, psi)
    t = np.asarray(geom.tangent)
    n = np.asarray(geom.normal)
    e = np.asarray(geom.rope_dir)
    G = plate.weight
    d = np.cos(psi)[..., None] * n + np.sin(psi)[..., None] * t
    r1 = np.asarray(geom.face_origin) - np.asarray(geom.pivot) + s[..., None] * t
    torque_g = -float(cross2(np.asarray(geom.r_g), G))
    A = cross2(r1, d)
    B = float(cross2(np.asarray(geom.r_t), e))
    with np.errstate(divide="ignore", invalid="ignore"):
        c0 = torque_g / A
        c1 = B / A
    u = -G - c0[..., None] * d
    v = c1[..., None] * d - e
    k1, k2, k3 = params.k1, params.k2, params.k3
    if kind is StateKind.SPRIME:
        tau = np.zeros_like(c0)
    else:
        den = k1 * (v * v).sum(-1) + k2 * c1**2 + k3
        with np.errstate(divide="ignore", invalid="ignore"):
            tau = np.where(den > 0, (k2 * c1 * c0 - k1 * (u * v).sum(-1)) / den, 0.0)
        lo = np.zeros_like(tau)
        hi = np.full_like(tau, np.inf)
        f1_max = math.sqrt(params.f1_sq_max)
        # each row is a + b * tau >= 0; the clip keeps a 2 * EPS margin so
        # that round-off at the boundary cannot fail the final check
        rows = (
            (c0 - 2 * EPS, -c1),
            (f1_max - 2 * EPS - c0, c1),
            (u[..., 1] - 2 * EPS, v[..., 1]),
            (u[..., 0] - 2 * EPS, v[..., 0]),
            (plate.mu0 * u[..., 1] - u[..., 0] - 2 * EPS, plate.mu0 * v[..., 1] - v[..., 0]),
        )
        for a, b in rows:
            with np.errstate(divide="ignore", invalid="ignore"):
                r = -a / b
            lo = np.where(b > 0, np.maximum(lo, r), lo)
            hi = np.where(b < 0, np.minimum(hi, r), hi)
            hi = np.where((b == 0) & (a < 0), -np.inf, hi)
        tau = np.clip(tau, lo, np.where(hi < lo, lo, hi))
    f1 = c0 - c1 * tau
    F1 = f1[..., None] * d
    F0 = -G - F1 - tau[..., None] * e
    J = k1 * (F0**2).sum(-1) + k2 * f1**2 + k3 * tau**2
    ok = (
        (A > 0)
        & (f1 >= EPS)
        & (f1**2 < params.f1_sq_max)
        & (F0[..., 1] >= EPS)
        & (F0[..., 0] >= EPS)
        & (F0[..., 0] <= plate.mu0 * F0[..., 1])
        & (tau >= 0)
    )
    ok &= np.isfinite(J)
    return np.where(ok, J, np.inf), tau, f1, F0, F1


@dataclass(frozen=True)
class PushStep:
    t: float
    plate_rotation: float
    rotation_center: tuple
    push_point: tuple
    r_1: tuple
    r_t: tuple
    r_g: tuple
    F0: tuple
    F1: tuple
    T: tuple
    state_kind: StateKind
    objective_value: float
    face_position: float
    push_angle: float
    tension: float
    active_edge: int
    admissible: tuple = ()
    released: bool = False


@dataclass(frozen=True)
class ChainLimits:
    """Per-hop speed budget and direction limit between push points."""

    budget: float
    gamma: float
    speed: bool = True
    direction: bool = True


@dataclass(frozen=True)
class TumbleTrajectory:
    steps: tuple
    edge_switch_index: Optional[int]
    tip_index: int
    plate: PlateSpec
    pin: tuple
    params: TumbleParams
    start_rotation: float
    rotation_step: float
    dt: float
    limits: ChainLimits
    fallback_windows: tuple = ()
    edges: Optional[EdgeContactModel] = None

    @property
    def push_points(self) -> np.ndarray:
        return np.array([s.push_point for s in self.steps])

    @property
    def windows(self) -> np.ndarray:
        return np.array([s.active_edge for s in self.steps])


def _quad_set(a2: float, a1: float, a0: float, lo: float, hi: float) -> list:
    """Sub-intervals of [lo, hi] where a2 s^2 + a1 s + a0 >= 0."""
    if abs(a2) < 1e-15:
        roots = [] if abs(a1) < 1e-15 else [-a0 / a1]
    else:
        disc = a1 * a1 - 4 * a2 * a0
        if disc < 0:
            roots = []
        else:
            sq = math.sqrt(disc)
            roots = sorted(((-a1 - sq) / (2 * a2), (-a1 + sq) / (2 * a2)))
    cuts = [lo] + [r for r in roots if lo < r < hi] + [hi]
    out = []
    for x, y in zip(cuts[:-1], cuts[1:]):
        m = 0.5 * (x + y)
        if a2 * m * m + a1 * m + a0 >= 0:
            out.append((x, y))
    return out


def _intersect(A: Sequence, B: Sequence) -> list:
    out = []
    for a, b in A:
        for c, d in B:
            lo, hi = max(a, c), min(b, d)
            if lo <= hi:
                out.append((lo, hi))
    return out


def _merge(iv: list) -> list:
    out: list = []
    for a, b in sorted(iv):
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def chain_intervals(geom: StepGeometry, prev_points: Sequence, limits: Optional[ChainLimits]) -> list:
    """Face positions ``s`` whose push point satisfies the chaining limits."""
    lo, hi = S_MIN, geom.face_length
    iv = [(lo, hi)]
    if limits is None or not prev_points:
        return iv
    base = np.asarray(geom.face_origin)
    t = np.asarray(geom.tangent)
    last = np.asarray(prev_points[-1])
    x0 = base - last  # push point minus last point is x0 + s t
    if limits.speed:
        b = limits.budget
        iv = _intersect(iv, _quad_set(-1.0, -2 * (x0 @ t), b * b - x0 @ x0, lo, hi))
    if limits.direction and len(prev_points) >= 2 and limits.gamma < math.pi:
        d = last - np.asarray(prev_points[-2])
        nd = np.linalg.norm(d)
        if nd > 1e-12:
            d = d / nd
            c2 = math.cos(limits.gamma) ** 2
            a2 = (t @ d) ** 2 - c2
            a1 = 2 * (x0 @ d) * (t @ d) - 2 * c2 * (x0 @ t)
            a0 = (x0 @ d) ** 2 - c2 * (x0 @ x0)
            both = _quad_set(a2, a1, a0, lo, hi)
            mid_dot = lambda a, b: (x0 + 0.5 * (a + b) * t) @ d
            if limits.gamma <= math.pi / 2:
                cone = [(a, b) for a, b in both if mid_dot(a, b) >= 0]
            else:
                # complement of the backward cone of half angle pi - gamma
                cone = [(lo, hi)]
                for a, b in both:
                    if mid_dot(a, b) < 0:
                        cone = [
                            seg
                            for c, e in cone
                            for seg in ((c, min(e, a)), (max(c, b), e))
                            if seg[0] < seg[1]
                        ]
            # pull the cone in so the widening below cannot turn past gamma
            cone = [(a + 2 * CHAIN_TOL, b - 2 * CHAIN_TOL) if b - a > 4 * CHAIN_TOL else (a, b) for a, b in cone]
            iv = _intersect(iv, cone)
    return [(max(lo, a - CHAIN_TOL), min(hi, b + CHAIN_TOL)) for a, b in _merge(iv)]


def _golden(f, a: float, b: float, iters: int = 60) -> tuple[float, float]:
    ratio = (math.sqrt(5) - 1) / 2
    c = b - ratio * (b - a)
    d = a + ratio * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if b - a < 1e-12:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - ratio * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + ratio * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _search(geom, plate, params, kind, intervals, n_s=GRID_S, n_psi=GRID_PSI):
    """Grid search over (s, psi) inside the intervals, then per-axis refinement."""
    lim = push_angle_limit(plate)
    psi = np.linspace(-lim, lim, n_psi)
    best = (math.inf, None, None)
    for a, b in intervals:
        s = np.linspace(a, b, n_s) if b > a else np.array([a])
        S, P = np.meshgrid(s, psi, indexing="ij")
        J = evaluate_push(geom, plate, params, S, P, kind)[0]
        i = np.unravel_index(np.argmin(J), J.shape)
        if J[i] < best[0]:
            ds = (b - a) / max(n_s - 1, 1)
            best = (float(J[i]), (float(S[i]), max(a, S[i] - ds), min(b, S[i] + ds)), float(P[i]))
    if best[1] is None:
        return None
    J0, (s0, s_lo, s_hi), p0 = best
    dpsi = 2 * lim / max(n_psi - 1, 1)
    f = lambda s_, p_: float(evaluate_push(geom, plate, params, s_, p_, kind)[0])
    for _ in range(3):
        if s_hi > s_lo:
            s1, J1 = _golden(lambda x: f(x, p0), s_lo, s_hi)
            if J1 < J0:
                s0, J0 = s1, J1
        p1, J1 = _golden(lambda x: f(s0, x), max(-lim, p0 - dpsi), min(lim, p0 + dpsi))
        if J1 < J0:
            p0, J0 = p1, J1
    return s0, p0, J0


def _make_step(geom, plate, params, kind, s, psi, t, admissible) -> PushStep:
    J, tau, f1, F0, F1 = evaluate_push(geom, plate, params, s, psi, kind)
    tau = float(tau)
    e = np.asarray(geom.rope_dir)
    p1 = np.asarray(geom.face_origin) + s * np.asarray(geom.tangent)
    pivot = np.asarray(geom.pivot)
    return PushStep(
        t=float(t),
        plate_rotation=geom.rotation,
        rotation_center=geom.pivot,
        push_point=vec2(p1),
        r_1=vec2(p1 - pivot),
        r_t=geom.r_t,
        r_g=geom.r_g,
        F0=vec2(F0),
        F1=vec2(F1),
        T=vec2(tau * e),
        state_kind=kind,
        objective_value=float(J),
        face_position=float(s),
        push_angle=float(psi),
        tension=tau,
        active_edge=geom.edge,
        admissible=tuple((float(a), float(b)) for a, b in admissible),
    )


def release_step(geom: StepGeometry, plate: PlateSpec, params: TumbleParams, t: float, push_point) -> PushStep:
    """Loosened instant with no push: the table carries the whole weight."""
    G = plate.weight
    pivot = np.asarray(geom.pivot)
    p1 = np.asarray(push_point, dtype=float)
    return PushStep(
        t=float(t),
        plate_rotation=geom.rotation,
        rotation_center=geom.pivot,
        push_point=vec2(p1),
        r_1=vec2(p1 - pivot),
        r_t=geom.r_t,
        r_g=geom.r_g,
        F0=vec2(-G),
        F1=(0.0, 0.0),
        T=(0.0, 0.0),
        state_kind=StateKind.SPRIME,
        objective_value=float(params.k1 * (G @ G)),
        face_position=float((p1 - np.asarray(geom.face_origin)) @ np.asarray(geom.tangent)),
        push_angle=0.0,
        tension=0.0,
        active_edge=geom.edge,
        released=True,
    )


def solve_push_instant(
    geom: StepGeometry,
    plate: PlateSpec,
    params: TumbleParams,
    kind: StateKind = StateKind.S,
    prev_points: Sequence = (),
    limits: Optional[ChainLimits] = None,
    admissible: Optional[Sequence] = None,
    t: float = 0.0,
) -> PushStep:
    """Minimum-effort forces and push point for one instant.

    ``prev_points`` are the push points of the preceding instants in the same
    rotation window (most recent last).  ``admissible`` optionally restricts the
    face positions further; degenerate intervals pin ``s`` to a value.
    A loosened instant that needs no push torque returns the release step.
    """
    kind = StateKind(kind)
    if kind is StateKind.SPRIME and -float(cross2(np.asarray(geom.r_g), plate.weight)) <= 1e-9 * plate.m * GRAVITY:
        last = prev_points[-1] if prev_points else geom.face_origin
        return release_step(geom, plate, params, t, last)
    iv = chain_intervals(geom, prev_points, limits)
    if admissible is not None:
        iv = _intersect(iv, [(float(a), float(b)) for a, b in admissible])
    if not iv:
        raise InfeasibleInstant("chaining limits leave no push point", rotation=geom.rotation)
    found = _search(geom, plate, params, kind, iv)
    if found is None:
        raise InfeasibleInstant("no admissible forces at this instant", rotation=geom.rotation)
    s, psi, _ = found
    return _make_step(geom, plate, params, kind, s, psi, t, iv)


def schedule(plate: PlateSpec, params: TumbleParams, start_rotation: float):
    """Half-step instants ``(k, rotation, kind)`` and the rotation step.

    Instants in the roll region, where the plate falls onto its thickness face
    by itself, are left out.  The last entry is the release at the final tip.
    """
    t1 = tip_angle(plate)
    t2 = final_tip_angle(plate)
    n = params.n_steps
    delta = (t2 - start_rotation) / n
    out = []
    for k in range(2 * n):
        th = start_rotation + k * delta / 2
        if t1 <= th < math.pi / 2:
            continue
        out.append((k, th, StateKind.S if k % 2 == 0 else StateKind.SPRIME))
    out.append((2 * n, t2, StateKind.SPRIME))
    return out, delta


def chain_limits(plate: PlateSpec, params: TumbleParams, delta: float) -> tuple[ChainLimits, float]:
    dt = params.dt
    if dt is None:
        dt = math.hypot(plate.h, plate.w) * delta / params.v_max
    budget = params.v_max * dt / 2
    return ChainLimits(budget, params.gamma, params.speed_limit, params.direction_limit), dt


def _viable_window(plate, params, geoms, kinds, limits, lattice=LATTICE_S, n_psi=GRID_PSI):
    """Lattice indices for a whole window, or None if no viable chain exists."""
    lim = push_angle_limit(plate)
    psi = np.linspace(-lim, lim, n_psi)
    s = np.linspace(plate.h / lattice, plate.h, lattice)
    S, P = np.meshgrid(s, psi, indexing="ij")
    Js, Ps = [], []
    for g, kind in zip(geoms, kinds):
        Js.append(evaluate_push(g, plate, params, S, P, kind)[0].min(1))
        Ps.append(np.asarray(g.face_origin) + s[:, None] * np.asarray(g.tangent))
    K = len(geoms)
    F = [np.isfinite(j) for j in Js]

    def ok_speed(k):
        if not limits.speed:
            return np.ones((lattice, lattice), bool)
        dist = np.linalg.norm(Ps[k][None, :] - Ps[k - 1][:, None], axis=-1)
        return dist <= limits.budget + CHAIN_TOL

    cg = math.cos(limits.gamma) if limits.direction and limits.gamma < math.pi else -2.0

    def ok_dir(k):
        d0 = Ps[k - 1][None, :, :] - Ps[k - 2][:, None, :]
        d1 = Ps[k][None, :, :] - Ps[k - 1][:, None, :]
        n0 = np.linalg.norm(d0, axis=-1)
        n1 = np.linalg.norm(d1, axis=-1)
        dot = np.einsum("ijc,jlc->ijl", d0, d1)
        return (dot >= cg * n0[:, :, None] * n1[None, :, :] - 1e-12) | (n0[:, :, None] < 1e-9) | (n1[None, :, :] < 1e-9)

    if K == 1:
        return [int(np.argmin(Js[0]))] if F[0].any() else None
    # V[k][i, j]: pair (s_{k-1} = i, s_k = j) can be completed to the window end
    V = [None] * K
    V[K - 1] = ok_speed(K - 1) & F[K - 2][:, None] & F[K - 1][None, :]
    for k in range(K - 2, 0, -1):
        nxt = (ok_dir(k + 1) & ok_speed(k + 1)[None, :, :] & V[k + 1][None, :, :]).any(2)
        V[k] = ok_speed(k) & F[k - 1][:, None] & F[k][None, :] & nxt
    idx: list[int] = []
    for k in range(K):
        if k == 0:
            cand = F[0] & V[1].any(1)
        else:
            cand = V[k][idx[-1]].copy()
            if k >= 2:
                cand &= ok_dir(k)[idx[-2], idx[-1]]
        if not cand.any():
            return None
        idx.append(int(np.argmin(np.where(cand, Js[k], np.inf))))
    return [float(s[i]) for i in idx]


def plan_tumble(
    plate: PlateSpec,
    edges: Optional[EdgeContactModel],
    params: TumbleParams,
    start_rotation: float,
    pin,
) -> TumbleTrajectory:
    """Alternating held/loosened push sequence from ``start_rotation`` to the final tip."""
    edges = edges or default_edges(plate)
    pin = vec2(pin)
    if not start_rotation < final_tip_angle(plate):
        raise ValueError("start rotation must lie below the final tip")
    sched, delta = schedule(plate, params, start_rotation)
    limits, dt = chain_limits(plate, params, delta)
    regular = sched[:-1]
    windows = [[x for x in regular if x[1] < edges.switch_angle], [x for x in regular if x[1] >= edges.switch_angle]]
    steps: list[PushStep] = []
    fallback = []
    for w, items in enumerate(windows):
        if not items:
            continue
        geoms = [step_geometry(plate, th, pin, edges) for _, th, _ in items]
        try:
            chain: list[PushStep] = []
            for (k, th, kind), g in zip(items, geoms):
                prev = [c.push_point for c in chain[-2:]]
                chain.append(solve_push_instant(g, plate, params, kind, prev, limits, t=k * dt / 2))
        except InfeasibleInstant as exc:
            picks = _viable_window(plate, params, geoms, [x[2] for x in items], limits)
            if picks is None:
                raise InfeasibleInstant(
                    f"no viable push sequence in window {w}", rotation=exc.rotation
                ) from exc
            fallback.append(w)
            chain = [
                solve_push_instant(g, plate, params, kind, admissible=[(s, s)], t=k * dt / 2)
                for (k, th, kind), g, s in zip(items, geoms, picks)
            ]
        steps.extend(chain)
    k_end, t2, _ = sched[-1]
    g_end = step_geometry(plate, t2, pin, edges)
    last = steps[-1].push_point if steps else g_end.face_origin
    steps.append(release_step(g_end, plate, params, k_end * dt / 2, last))
    switch = next((i for i, st in enumerate(steps) if st.plate_rotation >= edges.switch_angle), None)
    return TumbleTrajectory(
        steps=tuple(steps),
        edge_switch_index=switch,
        tip_index=len(steps) - 1,
        plate=plate,
        pin=pin,
        params=params,
        start_rotation=float(start_rotation),
        rotation_step=delta,
        dt=dt,
        limits=limits,
        fallback_windows=tuple(fallback),
        edges=edges,
    )


def push_pose(step: PushStep, table_height: float = 0.0, push_y: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """World fingertip position and approach direction (into the face)."""
    th = step.plate_rotation
    n = np.array([-math.sin(th), math.cos(th)])
    p = step.push_point
    return np.array([p[0], push_y, p[1] + table_height]), np.array([n[0], 0.0, n[1]])


def _step_reachable(step: PushStep, arm, table_height: float, push_y: float) -> bool:
    if step.released:
        return True
    p, a = push_pose(step, table_height, push_y)
    return bool(reachable_mask(arm, p, a, table_height)[0])


def _hops_ok(points: Sequence, limits: ChainLimits) -> bool:
    """Speed and direction limits along a short run of push points."""
    q = np.asarray(points, dtype=float)
    if len(q) < 2:
        return True
    d = np.diff(q, axis=0)
    L = np.linalg.norm(d, axis=1)
    if limits.speed and (L > limits.budget + CHAIN_TOL).any():
        return False
    if limits.direction and limits.gamma < math.pi:
        for a, b, la, lb in zip(d[:-1], d[1:], L[:-1], L[1:]):
            if la > 1e-12 and lb > 1e-12:
                c = float(a @ b) / (la * lb)
                if math.acos(min(1.0, max(-1.0, c))) > limits.gamma + CHAIN_TOL:
                    return False
    return True


def _complement(iv: list, lo: float, hi: float, holes: list) -> list:
    out = list(iv)
    for a, b in holes:
        out = [seg for c, e in out for seg in ((c, min(e, a)), (max(c, b), e)) if seg[1] > seg[0]]
    return _intersect(out, [(lo, hi)])


def check_kinematics_and_repair(
    traj: TumbleTrajectory,
    arm,
    scene=None,
    table_height: Optional[float] = None,
    push_y: float = 0.0,
    max_tries: int = 40,
) -> TumbleTrajectory:
    """Replace push points the pushing arm cannot reach.

    An unreachable instant is re-solved with a band around the rejected face
    position removed, doubling the band after every rejected candidate, while
    staying chained to its neighbours in the same rotation window.  Every other instant is left untouched.
    """
    if table_height is None:
        table_height = scene.table_height if scene is not None else 0.0
    steps = list(traj.steps)
    edges = traj.edges or default_edges(traj.plate)
    lim = traj.limits
    width0 = max(lim.budget, S_MIN) / 64
    for i, st in enumerate(steps):
        if _step_reachable(st, arm, table_height, push_y):
            continue
        same = [j for j in range(len(steps)) if steps[j].active_edge == st.active_edge and not steps[j].released]
        pos = same.index(i)
        before = [steps[j].push_point for j in same[max(0, pos - 2):pos]]
        after = [steps[j].push_point for j in same[pos + 1:pos + 3]]
        geom = step_geometry(traj.plate, st.plate_rotation, traj.pin, edges)
        base = list(st.admissible) if traj.fallback_windows and st.active_edge in traj.fallback_windows else None
        width = width0
        holes = [(st.face_position - width, st.face_position + width)]
        repaired = None
        for _ in range(max_tries):
            allowed = _complement([(S_MIN, geom.face_length)], S_MIN, geom.face_length, holes)
            if base is None:
                allowed = _intersect(allowed, chain_intervals(geom, before, lim))
            if not allowed:
                break
            try:
                cand = solve_push_instant(geom, traj.plate, traj.params, st.state_kind, admissible=allowed, t=st.t)
            except InfeasibleInstant:
                break
            ok_chain = _hops_ok([*before, cand.push_point, *after], lim)
            if ok_chain and _step_reachable(cand, arm, table_height, push_y):
                repaired = cand
                break
            # widen the band around the rejected point and fence off the candidate
            width *= 2
            holes = holes[1:] + [(st.face_position - width, st.face_position + width),
                                 (cand.face_position - width, cand.face_position + width)]
        if repaired is None:
            raise TumbleKinematicsFailed(
                "no reachable push point at this instant", rotation=st.plate_rotation, index=i
            )
        steps[i] = repaired
    if steps == list(traj.steps):
        return traj
    return replace(traj, steps=tuple(steps))


def plan_rope_return(rope: RopeState, arms: Sequence, sim_state, stroke: Optional[float] = None) -> list:
    """Alternating hand strokes toward the pin that feed the pulled rope back.

    Strokes are simulated on a copy of the state and stop as soon as the
    plate lies flat or the pulled rope is used up.
    """
    from .sim import FLAT_TILT, Phase, apply_return, start_return

    state = sim_state
    if state.phase is Phase.TUMBLING:
        state = start_return(state)
    if state.phase is Phase.DONE or state.plate_tilt <= FLAT_TILT:
        return []
    pin = np.asarray(rope.pin_point, dtype=float)
    clearance = 2 * rope.element_length
    grasps = annotate_grasps(None)
    cmds = []
    k = 0
    while state.pulled_total > 1e-9:
        arm = arms[k % len(arms)]
        step_len = stroke if stroke is not None else max((arm.reach_max - arm.reach_min) / 2, rope.element_length)
        d = min(step_len, state.pulled_total)
        start = pin - np.array([0.0, 0.0, clearance + d])
        end = pin - np.array([0.0, 0.0, clearance])
        a_pose, b_pose = goal_element_pose(pin, start), goal_element_pose(pin, end)
        chosen = grasps[0]
        for g in grasps:
            pa, pb = a_pose.compose(g.element_local_transform), b_pose.compose(g.element_local_transform)
            mask = reachable_mask(arm, [pa.pos, pb.pos], [pa.matrix[:, 2], pb.matrix[:, 2]], -math.inf)
            if mask.all():
                chosen = g
                break
        L = chosen.element_local_transform
        cmds.append(PullCommand(arm.name, chosen, a_pose.compose(L), b_pose.compose(L), float(d)))
        state = apply_return(state, d)
        k += 1
    return cmds


def normalized_switch(traj: TumbleTrajectory) -> Optional[float]:
    """Position of the edge switch as a fraction of the planned rotation span."""
    if traj.edge_switch_index is None:
        return None
    th = traj.steps[traj.edge_switch_index].plate_rotation
    end = traj.steps[traj.tip_index].plate_rotation
    return (th - traj.start_rotation) / (end - traj.start_rotation)


def path_metrics(traj: TumbleTrajectory) -> dict:
    """Largest hop between consecutive push points and summed direction change.

    Both are taken within each rotation window; the chain restarts at the
    edge switch.  Zero-length hops carry no direction and are skipped.
    """
    pts = traj.push_points
    win = traj.windows
    spacing = 0.0
    osc = 0.0
    for w in sorted(set(win.tolist())):
        q = pts[win == w]
        if len(q) < 2:
            continue
        dq = np.diff(q, axis=0)
        L = np.linalg.norm(dq, axis=1)
        spacing = max(spacing, float(L.max()))
        ang = np.arctan2(dq[:, 1], dq[:, 0])[L > 1e-9]
        if len(ang) > 1:
            osc += float(np.abs(np.diff(np.unwrap(ang))).sum())
    return {"max_spacing": spacing, "oscillation": osc}


def mean_push_height(traj: TumbleTrajectory, from_fraction: float = 0.5) -> float:
    """Mean height of the push points over the later part of the trajectory."""
    pts = traj.push_points
    start = int(len(pts) * from_fraction)
    return float(pts[start:, 1].mean())


TRAJECTORY_COLUMNS = (
    "t_s",
    "state_kind",
    "rotation_deg",
    "p1_x_mm",
    "p1_y_mm",
    "F0_N",
    "F1_N",
    "T_N",
    "objective",
    "active_edge",
)


def trajectory_rows(traj: TumbleTrajectory) -> list[list]:
    rows = []
    for st in traj.steps:
        rows.append(
            [
                st.t,
                st.state_kind.value,
                math.degrees(st.plate_rotation),
                st.push_point[0],
                st.push_point[1],
                math.hypot(*st.F0),
                math.hypot(*st.F1),
                math.hypot(*st.T),
                st.objective_value,
                st.active_edge,
            ]
        )
    return rows


def write_trajectory_csv(traj: TumbleTrajectory, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for row in trajectory_rows(traj):
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])
