"""Command-line entry point.

Exit codes: 0 success, 2 validation/parse error, 3 solver failure,
4 plan infeasible/unreachable. ROLLERSIM_LOG={error,warn,info,debug}
controls diagnostics on stderr. All subcommands are deterministic given
their inputs and --seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    ParseError,
    PlanningError,
    RollerSimError,
    SolverError,
    ValidationError,
)
from .geometry import IDENTITY_QUAT, geodesic_angle, random_quat
from .planner import (
    PlannerOptions,
    Pose,
    plan_rotation,
    plan_translation,
    reachable_set,
)
from .scenario import preset_names, preset_scenario, ring_scenario
from .scenario_io import export_trajectory, load_scenario, load_schedule
from .simulator import run, success_check

logger = logging.getLogger("rollersim")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_INFEASIBLE = 4

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def _setup_logging():
    level = os.environ.get("ROLLERSIM_LOG", "warn").lower()
    logging.basicConfig(
        level=_LOG_LEVELS.get(level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _load_scenario_arg(arg: str):
    if arg in preset_names():
        return preset_scenario(arg)
    return load_scenario(Path(arg))


def cmd_simulate(args) -> int:
    scenario = _load_scenario_arg(args.scenario)
    if args.dt is not None:
        from dataclasses import replace
        scenario = replace(scenario, sim=replace(scenario.sim, dt=args.dt))
    schedule = load_schedule(Path(args.schedule), scenario) if args.schedule else []
    trajectory = run(scenario, schedule)
    if args.out:
        Path(args.out).write_bytes(export_trajectory(trajectory, args.format))
    final = trajectory.final_state
    total_dissipation = sum(
        s.dissipation for s in trajectory.samples
    ) * scenario.sim.dt
    print(f"samples: {len(trajectory)}")
    print(f"final t: {final.t:.6f} s")
    print(f"final quat: [{', '.join('%.9f' % x for x in final.orientation)}]")
    print(f"final pos: [{', '.join('%.9f' % x for x in final.position)}]")
    print(f"total dissipation: {total_dissipation:.9f} J")
    if trajectory.escaped:
        print("escaped: true")
    if args.target:
        target = np.array([float(x) for x in args.target])
        achieved, t_done = success_check(trajectory, target, scenario.sim)
        print(f"success: {achieved}" + (f" at t={t_done:.4f} s" if achieved else ""))
    return EXIT_OK


def cmd_plan(args) -> int:
    scenario = _load_scenario_arg(args.scenario)
    opts = PlannerOptions(seed=args.seed)
    if args.goal_quat:
        goal = np.array([float(x) for x in args.goal_quat])
        plan = plan_rotation(scenario, IDENTITY_QUAT, goal, opts)
    elif args.translate:
        delta = np.array([float(x) for x in args.translate])
        dist = float(np.linalg.norm(delta))
        if dist == 0.0:
            plan = plan_translation(scenario, [0, 0, 1], 0.0, opts)
        else:
            plan = plan_translation(scenario, delta / dist, dist, opts)
    else:
        raise ValidationError("give either --goal-quat or --translate")

    obj = {
        "status": plan.status,
        "detour_ratio": plan.detour_ratio,
        "segments": [
            {
                "speeds": list(seg.command.speeds),
                "duration": seg.duration,
                "expected_omega": list(seg.expected_omega),
                "expected_v": list(seg.expected_v),
            }
            for seg in plan.segments
        ],
        "expected_final": {
            "quat": list(plan.expected_final_pose.orientation),
            "pos": list(plan.expected_final_pose.position),
        },
    }
    if args.out:
        Path(args.out).write_text(json.dumps(obj, indent=2), encoding="utf-8")
    print(f"segments: {len(plan.segments)}")
    print(f"detour_ratio: {plan.detour_ratio:.6f}")
    print(f"total duration: {plan.total_duration:.4f} s")
    return EXIT_OK


def cmd_sweep(args) -> int:
    lo, hi = args.contacts
    if args.goals < 1:
        raise ValidationError("--goals must be >= 1")
    rows = ["contact_count,goal_index,detour_ratio,segments,coverage"]
    for n in range(lo, hi + 1):
        scenario = ring_scenario(n)
        opts = PlannerOptions(seed=args.seed)
        reach = reachable_set(scenario, opts.n_samples, opts)
        rng = np.random.default_rng(args.seed)
        for k in range(args.goals):
            goal = random_quat(rng)
            plan = plan_rotation(scenario, IDENTITY_QUAT, goal, opts, reach=reach)
            rows.append(
                f"{n},{k},{plan.detour_ratio:.17g},{len(plan.segments)},"
                f"{reach.coverage:.17g}"
            )
    text = "\n".join(rows) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import build_app

    app = build_app(tick_rate=args.tick_rate, max_sessions=args.max_sessions)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def _contact_range(text: str) -> tuple[int, int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        lo, hi = int(lo), int(hi)
    else:
        lo = hi = int(text)
    if lo < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"bad contact range {text!r}")
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rollersim",
        description="Quasi-static roller-ring in-hand manipulation: "
                    "simulate, plan, sweep, serve.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a command schedule and export the trajectory")
    p.add_argument("scenario", help="scenario JSON path or preset name")
    p.add_argument("schedule", nargs="?", help="schedule JSON path (omit for empty)")
    p.add_argument("--out", help="trajectory output path")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--dt", type=float, help="override simulation step")
    p.add_argument("--target", nargs=4, metavar=("QW", "QX", "QY", "QZ"),
                   help="report success against this target orientation")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("plan", help="plan a reorientation or translation")
    p.add_argument("scenario", help="scenario JSON path or preset name")
    p.add_argument("--goal-quat", nargs=4, metavar=("QW", "QX", "QY", "QZ"))
    p.add_argument("--translate", nargs=3, metavar=("DX", "DY", "DZ"))
    p.add_argument("--out", help="plan JSON output path")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("sweep", help="detour/coverage statistics vs contact count")
    p.add_argument("--contacts", type=_contact_range, default=(2, 4),
                   help="contact count range, e.g. 2..4")
    p.add_argument("--goals", type=int, default=10, help="goals per contact count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("serve", help="run the teleoperation service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8123)
    p.add_argument("--tick-rate", type=float, default=60.0)
    p.add_argument("--max-sessions", type=int, default=32)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except PlanningError as exc:
        print(f"planning failed: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SolverError as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except RollerSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
