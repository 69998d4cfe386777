import os
import sys

import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("default")

from pulleyflip import scenarios  # noqa: E402
from pulleyflip.pipeline import run_lift  # noqa: E402
from pulleyflip.tumble_planner import plan_tumble  # noqa: E402

PLATE_NAMES = ("acrylic", "stainless", "plywood")


def pin2(scenario):
    p = scenario.rope.pin_point
    return (p[0], p[2] - scenario.table_height)


@pytest.fixture(scope="session")
def trajectories():
    """Planned tumbles of the three reference plates from their lift thresholds."""
    out = {}
    for name in PLATE_NAMES:
        sc = scenarios.make_scenario(name)
        out[name] = plan_tumble(sc.plate, None, sc.tumble_params, sc.alpha_thld, pin2(sc))
    return out


@pytest.fixture(scope="session")
def lift_runs():
    """Noiseless lifts of the three reference plates, seed 0."""
    out = {}
    for name in PLATE_NAMES:
        sc = scenarios.make_scenario(name, seed=0)
        result, sim = run_lift(sc, 0)
        out[name] = (sc, result, sim)
    return out


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, title, elapsed, detail = results[n]
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}  [{elapsed:.1f} s]"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
