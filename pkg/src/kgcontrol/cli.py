"""Command-line front end.

Exit codes: 0 success, 2 flagged (hypothesis unmet, target not reached, non-monotone
rates), 1 correctness failure (finite-speed leakage), 64 usage or parse error,
65 amplitude cap violation.
"""

from __future__ import annotations

import argparse
import itertools
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from .experiments import DEFAULT_LADDERS, RATE_OPS, kirchhoff_demo, rates, verify_finite_speed
from .fields import FieldSpecError, make_field
from .grid import State, TorusGrid
from .propagators import CapViolation
from .reports import FormatError, report_to_json, write_report, write_table
from .scenario import ScenarioError, build, load_scenario, run_scenario
from .strategy import PlanRejected

EXIT_OK, EXIT_FAIL, EXIT_FLAGGED, EXIT_USAGE, EXIT_CAP = 0, 1, 2, 64, 65


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _ladder(text: str | None):
    if text is None:
        return None
    try:
        vals = [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise UsageError(f"--tau-ladder must be comma-separated numbers, got {text!r}") from None
    if len(vals) < 2 or any(b >= a for a, b in zip(vals, vals[1:])):
        raise UsageError("--tau-ladder must hold at least two strictly decreasing values")
    return vals


def _out_dir(args, default: str) -> Path:
    out = Path(args.out_dir or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- subcommands -----------------------------------------------------------------

def cmd_run(args) -> int:
    sc = load_scenario(args.scenario)
    if args.seed is not None:
        sc = sc.with_overrides({}, seed=args.seed)
    ladder = _ladder(args.tau_ladder) if args.tau_ladder else None
    if ladder is not None and sc.get("planner") != "compile":
        raise UsageError("--tau-ladder applies to the compile planner only")
    res = run_scenario(sc, args.out_dir, args.dt, ladder)
    print(f"status={res.report['status']} error={res.report['achieved_error']:.4g} "
          f"eps={res.report['eps']:.4g} total_time={res.report['total_time']:.4g}")
    for c in res.report["checks"]:
        if not c["passed"]:
            print(f"failed check: {c['name']} ({c['value']:.4g})")
    for f in res.report["flags"]:
        print(f"flag: {f}")
    return res.exit_code


def cmd_rates(args) -> int:
    W0, grid = None, None
    if args.scenario:
        b = build(load_scenario(args.scenario))
        W0, grid = b.W0, b.grid
    elif args.profile is not None or args.velocity is not None:
        grid = TorusGrid(1, args.n)
        W0 = State(make_field(grid, args.profile or "0"), make_field(grid, args.velocity or "0"))
    table = rates(args.op, _ladder(args.tau_ladder), W0, grid, amount=args.amount, dt=args.dt)
    out = _out_dir(args, "out")
    path = out / f"rates_{args.op}.txt"
    write_table(path, ["tau", "error", "order", "total_time"], table.rows(),
                f"op={args.op} amount={table.info['amount']}")
    print(path.read_text(), end="")
    if not table.monotone:
        print("error is not strictly decreasing over the ladder")
        return EXIT_FLAGGED
    return EXIT_OK


def cmd_verify_speed(args) -> int:
    grid = TorusGrid(args.dim, args.n)
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    kind = "squared" if args.mutate else "massive"
    rep = verify_finite_speed(grid, args.radius, rng, args.amplitude, dt=args.dt or 1e-3,
                              kind=kind, zero_schedule=args.zero_schedule)
    out = _out_dir(args, "out")
    rows = [(t, leak, rep.threshold) for t, leak in zip(rep.times, rep.leakage)]
    write_table(out / "cone_leakage.txt", ["t", "leakage", "threshold"], rows,
                f"dispersion={kind} radius={args.radius} N={args.n}")
    for t, leak, _ in rows:
        print(f"t={t:.3f} leakage={leak:.3e}")
    print("finite speed respected" if rep.passed else "LEAKAGE above threshold")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_kirchhoff(args) -> int:
    rep = kirchhoff_demo(args.r_inner, args.half_width, args.eps_t)
    out = _out_dir(args, "out")
    write_table(out / "kirchhoff_scan.txt", ["t", "w_t_x0"], list(zip(rep.times, rep.values)),
                f"R'={args.r_inner} R={args.half_width}")
    doc = {"vanishing_interval": list(rep.interval), "required_interval": list(rep.required),
           "covers": rep.covers, "t_after": rep.t_after, "value_after": rep.value_after,
           "contrast": rep.contrast}
    write_report(out / "kirchhoff_report.json", doc)
    print(report_to_json(doc), end="")
    return EXIT_OK if rep.passed else EXIT_FLAGGED


def _parse_grid(specs) -> list[dict]:
    axes = []
    for spec in specs or []:
        key, sep, vals = spec.partition("=")
        if not sep or not key:
            raise UsageError(f"--grid entries look like key=v1,v2; got {spec!r}")
        axes.append([(key, yaml.safe_load(v)) for v in vals.split(",") if v != ""])
    if not axes or any(not a for a in axes):
        return []
    return [dict(cell) for cell in itertools.product(*axes)]


def _sweep_cell(job):
    index, scenario_path, overrides, seed, out_dir, dt = job
    try:
        sc = load_scenario(scenario_path).with_overrides(overrides, seed=seed)
        res = run_scenario(sc, Path(out_dir) / f"cell_{index:03d}", dt)
        return index, res.exit_code, res.report["achieved_error"], res.report["total_time"], ""
    except CapViolation as exc:
        return index, EXIT_CAP, float("nan"), float("nan"), str(exc)
    except (ScenarioError, FieldSpecError, PlanRejected, ValueError) as exc:
        return index, EXIT_USAGE, float("nan"), float("nan"), str(exc)


def cmd_sweep(args) -> int:
    base = load_scenario(args.scenario)
    cells = _parse_grid(args.grid)
    seed0 = args.seed if args.seed is not None else base.seed
    out = _out_dir(args, "out")
    jobs = [(i, args.scenario, cell, seed0 + i, str(out), args.dt) for i, cell in enumerate(cells)]
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            results = list(pool.map(_sweep_cell, jobs))
    else:
        results = [_sweep_cell(j) for j in jobs]
    keys = list(cells[0]) if cells else []
    rows = []
    for (i, code, err, time, msg), cell in zip(results, cells):
        rows.append([i] + [cell[k] for k in keys] + [seed0 + i, code, err, time, msg or "-"])
    write_table(out / "sweep.txt", ["cell"] + keys + ["seed", "exit", "error", "total_time", "note"],
                rows, f"scenario={Path(args.scenario).name}")
    print((out / "sweep.txt").read_text(), end="")
    return EXIT_OK


# --- parser ----------------------------------------------------------------------

def _common(p, scenario_required=False):
    p.add_argument("--scenario", required=scenario_required, help="YAML scenario file")
    p.add_argument("--out-dir", help="directory for report files")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--dt", type=float, help="splitting step (default: min(duration, 2 pi / 4N))")
    p.add_argument("--tau-ladder", help="comma-separated strictly decreasing tau values")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kgcontrol", description="Bilinear control of Klein-Gordon waves on a torus")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("run", help="run a scenario")
    _common(p, scenario_required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("rates", help="convergence table of a compiled operator")
    p.add_argument("op", choices=RATE_OPS)
    _common(p)
    p.add_argument("--amount", type=float, help="leaf coefficient, delta or a")
    p.add_argument("--profile", help="initial profile expression (d = 1)")
    p.add_argument("--velocity", help="initial velocity expression (d = 1)")
    p.add_argument("--n", type=int, default=64)
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("verify-speed", help="finite-speed cone test of the integrator")
    _common(p)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--amplitude", type=float, default=5.0)
    p.add_argument("--zero-schedule", action="store_true")
    p.add_argument("--mutate", action="store_true",
                   help="use the broken <n>^4 dispersion (negative control)")
    p.set_defaults(func=cmd_verify_speed)

    p = sub.add_parser("kirchhoff", help="the d = 3 vanishing-interval demo")
    _common(p)
    p.add_argument("--r-inner", type=float, default=0.3)
    p.add_argument("--half-width", type=float, default=0.9)
    p.add_argument("--eps-t", type=float, default=0.05)
    p.set_defaults(func=cmd_kirchhoff)

    p = sub.add_parser("sweep", help="cross-product of scenario overrides")
    _common(p, scenario_required=True)
    p.add_argument("--grid", action="append", help="dotted.key=v1,v2 (repeatable)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ScenarioError, FieldSpecError, FormatError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapViolation as exc:
        print(f"cap violation: {exc}", file=sys.stderr)
        return EXIT_CAP
    except PlanRejected as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return EXIT_FLAGGED


if __name__ == "__main__":
    sys.exit(main())
