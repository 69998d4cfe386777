"""YAML scenario files.

The file is a nested mapping whose keys are the dataclass field names of
:class:`~pulleyflip.core_types.Scenario`.  Vectors are written as flow lists,
enums as their string values and angles in radians.  Floats are emitted with
``repr`` precision so a dump/load cycle is lossless.
"""

from __future__ import annotations

import dataclasses
from enum import Enum
from pathlib import Path
from typing import Any

import yaml

from .core_types import (
    ArmName,
    ArmSpec,
    Box,
    CylinderElement,
    PlateSpec,
    RopeState,
    Scenario,
    Segment,
    TumbleParams,
)
from .errors import ScenarioError


def _plain(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (tuple, list)):
        return [_plain(x) for x in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return int(obj)
    if isinstance(obj, float) or hasattr(obj, "__float__"):
        return float(obj)
    raise TypeError(f"cannot serialise {type(obj)!r}")


def scenario_to_dict(s: Scenario) -> dict:
    return _plain(s)


def _tuple3(x) -> tuple:
    return tuple(float(v) for v in x)


def _segment(d) -> Segment:
    return Segment(d["start"], d["end"])


def _arm(d) -> ArmSpec:
    d = dict(d)
    d["name"] = ArmName(d["name"])
    d["body_segments"] = tuple(_segment(x) for x in d.get("body_segments", ()))
    return ArmSpec(**d)


def _element(d) -> CylinderElement:
    return CylinderElement(**d)


def _rope(d) -> RopeState:
    d = dict(d)
    d["elements"] = tuple(_element(x) for x in d.get("elements", ()))
    return RopeState(**d)


def _box(d) -> Box:
    d = dict(d)
    d["axes"] = tuple(_tuple3(a) for a in d.get("axes", Box((0, 0, 0), (1, 1, 1)).axes))
    return Box(**d)


def scenario_from_dict(d: dict) -> Scenario:
    try:
        d = dict(d)
        d["plate"] = PlateSpec(**d["plate"])
        d["arms"] = tuple(_arm(a) for a in d["arms"])
        d["rope"] = _rope(d["rope"])
        if "tumble_params" in d:
            d["tumble_params"] = TumbleParams(**d["tumble_params"])
        d["obstacles"] = tuple(_box(b) for b in d.get("obstacles", ()))
        return Scenario(**d)
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"malformed scenario: {exc}") from exc


def dumps(s: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(s), sort_keys=False, default_flow_style=None, width=100)


def loads(text: str) -> Scenario:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"unreadable scenario: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a mapping")
    return scenario_from_dict(data)


def save(s: Scenario, path) -> None:
    Path(path).write_text(dumps(s), encoding="utf-8")


def load(path) -> Scenario:
    return loads(Path(path).read_text(encoding="utf-8"))
