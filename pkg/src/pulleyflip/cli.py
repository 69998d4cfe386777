"""Command line experiment runner.

Subcommands:

``run``       one lift, tumble and return episode with CSV and JSON output
``sweep``     lift-only comparison of quality weights over many seeds
``ablate``    tumble planning over a matrix of constraint and parameter variants
``scenario``  write a built-in scenario to a YAML file

Exit codes are 0 on success, 2 for an invalid scenario, 3 when a planner
gives up and 4 for file problems.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from . import scenario_io
from .core_types import Scenario
from .errors import PlannerError, ScenarioError
from .lift_controller import action_count, write_event_csv
from .pipeline import build_report, ensure_valid, report_json, run_episode, run_lift
from .scenarios import LIFT_THRESHOLDS, PLATES, make_scenario
from .tumble_planner import (
    mean_push_height,
    normalized_switch,
    path_metrics,
    plan_tumble,
    write_trajectory_csv,
)

EXIT_OK, EXIT_INVALID, EXIT_PLANNER, EXIT_IO = 0, 2, 3, 4

SWEEP_RUN_COLUMNS = (
    "weights", "seed", "n_pulls", "action_count", "mean_distance_mm", "mean_force_N", "mean_theta_deg", "final_tilt_deg",
)
SWEEP_SUMMARY_COLUMNS = (
    "weights", "seeds", "action_count", "n_pulls", "mean_distance_mm", "mean_force_N", "mean_theta_deg",
)
GOAL_COLUMNS = ("weights", "seed", "loop", "arm", "x_mm", "y_mm", "z_mm")
ABLATION_COLUMNS = (
    "cell", "plate", "n_steps", "max_spacing_mm", "oscillation_deg", "edge_switch_index",
    "normalized_switch", "second_half_mean_p1_y_mm", "fallback_windows", "status",
)


def load_scenario(ref: str) -> Scenario:
    """A YAML file path, or a built-in name such as ``acrylic`` or ``plywood_obstacle``."""
    path = Path(ref)
    if path.exists():
        return scenario_io.load(path)
    base, _, suffix = ref.partition("_")
    if base in PLATES and suffix in ("", "obstacle"):
        return make_scenario(base, obstacle=bool(suffix))
    raise FileNotFoundError(f"no scenario file or built-in scenario named {ref!r}")


def parse_weights(text: str) -> list[tuple]:
    """``"1,0,0;0,1,0"`` to a list of weight triples."""
    out = []
    for chunk in text.split(";"):
        vals = tuple(float(x) for x in chunk.replace(" ", "").split(","))
        if len(vals) != 3:
            raise ValueError(f"weights need three values: {chunk!r}")
        out.append(vals)
    return out


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _write_csv(path: Path, columns: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def wkey(w) -> str:
    return ",".join(f"{x:g}" for x in w)


# ---------------------------------------------------------------- commands


def cmd_run(args) -> int:
    sc = load_scenario(args.scenario)
    if args.weights:
        sc = sc.with_(quality_weights=parse_weights(args.weights)[0])
    seed = sc.rng_seed if args.seed is None else args.seed
    sc = sc.with_(rng_seed=seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ep = run_episode(sc, seed)
    report = build_report(ep)
    write_event_csv(ep.lift, out / "events.csv")
    write_trajectory_csv(ep.trajectory, out / "trajectory.csv")
    (out / "report.json").write_text(report_json(report), encoding="utf-8")
    (out / "timings.json").write_text(json.dumps(ep.timings, indent=2) + "\n", encoding="utf-8")
    t = report["totals"]
    print(
        f"{report['scenario_id']} seed {seed}: {t['n_pulls']} pulls, {t['action_count']} actions, "
        f"mean pull {t['mean_distance_mm']:.1f} mm, tumble {report['tumble']['n_steps']} steps, "
        f"phase {report['phase']}, final tilt {report['final_tilt_deg']:.2f} deg"
    )
    return EXIT_OK


def sweep(sc: Scenario, weights: Sequence[tuple], seeds: Sequence[int]) -> tuple[list, list, list]:
    """Per-run rows, per-weight summary rows and selected-goal rows."""
    runs, summary, goals = [], [], []
    for w in weights:
        per = []
        for seed in seeds:
            s = sc.with_(quality_weights=w, rng_seed=seed)
            ensure_valid(s)
            lift, _ = run_lift(s, seed)
            d = [p.distance for p in lift.pulls]
            f = [p.force for p in lift.pulls]
            th = [math.degrees(p.theta) for p in lift.pulls]
            row = [wkey(w), seed, len(d), action_count(lift), float(np.mean(d)), float(np.mean(f)),
                   float(np.mean(th)), math.degrees(lift.final_tilt)]
            runs.append(row)
            per.append(row)
            goals.extend([wkey(w), seed, p.loop, p.arm.value, *p.goal] for p in lift.pulls)
        cols = np.array([r[2:7] for r in per], dtype=float)
        m = cols.mean(axis=0)
        summary.append([wkey(w), len(per), m[1], m[0], m[2], m[3], m[4]])
    return runs, summary, goals


def cmd_sweep(args) -> int:
    sc = load_scenario(args.scenario)
    weights = parse_weights(args.weights)
    seeds = list(range(args.seed0, args.seed0 + args.seeds))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    runs, summary, goals = sweep(sc, weights, seeds)
    _write_csv(out / "sweep_runs.csv", SWEEP_RUN_COLUMNS, runs)
    _write_csv(out / "sweep_summary.csv", SWEEP_SUMMARY_COLUMNS, summary)
    _write_csv(out / "goals.csv", GOAL_COLUMNS, goals)
    print(f"{'weights':<12}{'actions':>9}{'pulls':>8}{'dist mm':>10}{'force N':>10}{'theta':>8}")
    for r in summary:
        print(f"{r[0]:<12}{r[2]:>9.2f}{r[3]:>8.2f}{r[4]:>10.1f}{r[5]:>10.2f}{r[6]:>8.1f}")
    return EXIT_OK


def ablation_cell(plate_name: str, row: dict):
    """Plate and tumble parameters of one matrix row applied to a built-in plate."""
    plate = PLATES[plate_name]
    plate_keys = {k: row[k] for k in ("mu0", "mu1", "com", "hook", "m") if k in row}
    if plate_keys:
        plate = replace(plate, **plate_keys)
    sc = make_scenario(plate_name)
    params = sc.tumble_params
    p = {k: row[k] for k in ("k1", "k2", "k3", "f1_sq_max", "v_max", "n_steps", "speed_limit", "direction_limit") if k in row}
    if "gamma_deg" in row:
        p["gamma"] = math.radians(row["gamma_deg"])
    params = replace(params, **p)
    start = math.radians(row["start_deg"]) if "start_deg" in row else LIFT_THRESHOLDS[plate_name]
    pin = sc.rope.pin_point
    return plate, params, start, (pin[0], pin[2] - sc.table_height)


def ablate(matrix: list, plates: Sequence[str], out: Optional[Path] = None) -> list:
    rows = []
    for row in matrix:
        cell = str(row.get("id", len(rows)))
        for name in row.get("plates", plates):
            plate, params, start, pin = ablation_cell(name, row)
            key = f"{cell}__{name}"
            try:
                traj = plan_tumble(plate, None, params, start, pin)
            except PlannerError as exc:
                rows.append([key, name, 0, math.nan, math.nan, "", "", math.nan, "", exc.name])
                continue
            if out is not None:
                write_trajectory_csv(traj, out / f"traj_{key}.csv")
            m = path_metrics(traj)
            ns = normalized_switch(traj)
            rows.append([
                key, name, len(traj.steps), m["max_spacing"], math.degrees(m["oscillation"]),
                "" if traj.edge_switch_index is None else traj.edge_switch_index,
                "" if ns is None else ns, mean_push_height(traj),
                " ".join(str(w) for w in traj.fallback_windows), "ok",
            ])
    return rows


def cmd_ablate(args) -> int:
    with open(args.matrix, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    matrix = data["cells"] if isinstance(data, dict) else data
    if not isinstance(matrix, list):
        raise ScenarioError("ablation matrix must be a list of cells")
    plates = args.plates.split(",") if args.plates else list(PLATES)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = ablate(matrix, plates, out)
    _write_csv(out / "ablation_metrics.csv", ABLATION_COLUMNS, rows)
    print(f"{'cell':<28}{'steps':>6}{'spacing':>10}{'osc deg':>10}{'switch':>8}")
    for r in rows:
        print(f"{r[0]:<28}{r[2]:>6}{r[3]:>10.2f}{r[4]:>10.1f}{str(r[5]):>8}")
    return EXIT_OK


def cmd_scenario(args) -> int:
    sc = make_scenario(args.name, weights=parse_weights(args.weights)[0], seed=args.seed, obstacle=args.obstacle)
    scenario_io.save(sc, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pulleyflip", description="Plan dual-arm pulley lifting and plate tumbling.")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="lift, tumble and return one plate")
    r.add_argument("--scenario", required=True, help="YAML file or built-in name")
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--weights", default=None, help="override quality weights, e.g. 1,1,1")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="compare quality weights over seeds (lift only)")
    s.add_argument("--scenario", default="acrylic")
    s.add_argument("--weights", default="1,0,0;0,1,0;0,0,1;1,1,1")
    s.add_argument("--seeds", type=int, default=15)
    s.add_argument("--seed0", type=int, default=0)
    s.add_argument("--out", default="sweep_out")
    s.set_defaults(func=cmd_sweep)

    a = sub.add_parser("ablate", help="tumble planning over a constraint/parameter matrix")
    a.add_argument("--matrix", required=True, help="YAML list of cells")
    a.add_argument("--plates", default=None, help="comma separated built-in plates")
    a.add_argument("--out", default="ablate_out")
    a.set_defaults(func=cmd_ablate)

    c = sub.add_parser("scenario", help="write a built-in scenario as YAML")
    c.add_argument("name", choices=sorted(PLATES))
    c.add_argument("--out", required=True)
    c.add_argument("--weights", default="1,1,1")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--obstacle", action="store_true")
    c.set_defaults(func=cmd_scenario)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except PlannerError as exc:
        print(f"{exc.name}: {exc}", file=sys.stderr)
        return EXIT_PLANNER
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
