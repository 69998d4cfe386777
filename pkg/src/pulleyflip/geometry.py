"""Planar plate kinematics about the two table-contact edges.

The plate starts flat with its first contact edge at the cross-section origin.
It rotates about that edge until ``switch_angle``, when the thickness face is
flat on the table, and from then on about the far edge of that face.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core_types import PlateSpec, Pose2, Vec2, rot2, vec2


@dataclass(frozen=True)
class EdgeContactModel:
    first_edge: Vec2
    second_edge: Vec2
    switch_angle: float

    def __post_init__(self):
        object.__setattr__(self, "first_edge", vec2(self.first_edge))
        object.__setattr__(self, "second_edge", vec2(self.second_edge))


def default_edges(plate: PlateSpec) -> EdgeContactModel:
    """Edges for a rectangular section resting on its ``v = 0`` face."""
    switch = math.pi / 2
    second = rot2(switch) @ np.array([0.0, plate.w])
    return EdgeContactModel((0.0, 0.0), vec2(second), switch)


def _edge_local(plate: PlateSpec, index: int) -> np.ndarray:
    return np.zeros(2) if index == 0 else np.array([0.0, plate.w])


def active_edge(rotation: float, edges: EdgeContactModel) -> int:
    return 0 if rotation < edges.switch_angle else 1


def plate_point(plate: PlateSpec, edges: EdgeContactModel, rotation: float, local) -> np.ndarray:
    """World (cross-section) coordinates of plate-local points at ``rotation``."""
    k = active_edge(rotation, edges)
    pivot = np.asarray(edges.first_edge if k == 0 else edges.second_edge)
    local = np.asarray(local, dtype=float)
    return pivot + (local - _edge_local(plate, k)) @ rot2(rotation).T


def plate_pose_at(rotation: float, plate: PlateSpec, edges: EdgeContactModel) -> tuple[Pose2, int]:
    """Pose of the plate-local origin plus the index of the active edge."""
    if not -1e-12 <= rotation <= math.pi + 1e-12:
        raise ValueError("rotation must lie in [0, pi]")
    origin = plate_point(plate, edges, rotation, (0.0, 0.0))
    return Pose2(origin, rotation), active_edge(rotation, edges)


def edge_point(edges: EdgeContactModel, index: int) -> np.ndarray:
    return np.asarray(edges.first_edge if index == 0 else edges.second_edge)


def gravity_moment(plate: PlateSpec, edges: EdgeContactModel, rotation: float) -> float:
    """Moment of the weight about the active edge (positive tips the plate over)."""
    k = active_edge(rotation, edges)
    r = plate_point(plate, edges, rotation, plate.com) - edge_point(edges, k)
    return float(r[0] * plate.weight[1] - r[1] * plate.weight[0])


def tip_angle(plate: PlateSpec, edges: EdgeContactModel | None = None) -> float:
    """Rotation at which the centre of mass passes over the first edge."""
    cu, cv = plate.com
    return math.atan2(cu, cv)


def final_tip_angle(plate: PlateSpec, edges: EdgeContactModel | None = None) -> float:
    """Rotation at which the centre of mass passes over the second edge."""
    cu, cv = plate.com
    return math.pi - math.atan2(cu, plate.w - cv)


def plate_corners(plate: PlateSpec, edges: EdgeContactModel, rotation: float) -> np.ndarray:
    local = np.array([[0.0, 0.0], [plate.h, 0.0], [plate.h, plate.w], [0.0, plate.w]])
    return plate_point(plate, edges, rotation, local)
