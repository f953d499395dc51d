"""YAML scenario files and their execution."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .fields import FieldSpecError, make_field, random_field
from .grid import State, TorusField, TorusGrid, energy_norm
from .propagators import (AMPLITUDE_CAP, BackgroundPotential, Schedule, Segment, exp_B, exp_Bstar,
                          exp_F, simulate)
from .reports import digest, plan_report_doc, write_report, write_schedule, write_trajectory
from .saturation import (SynthesisParams, compile_expB, compile_expBstar, compile_expF,
                         hierarchy_decompose, required_resolution, select_tau,
                         to_sexpr)
from .strategy import (PlannerParams, PlanReport, plan_large_time, plan_min_time,
                       plan_reach_zero_phi, plan_stac, plan_velocity)
from .trigpoly import TrigPoly
from .zero_sets import inscribed_radius, state_zero_mask, vanishing_profile

PLANNERS = ("simulate", "velocity", "stac", "reach_zero_phi", "min_time", "large_time", "compile")
SCENARIO_VERSION = 1


class ScenarioError(ValueError):
    """Scenario text that does not parse; the message names the field and line."""


@dataclass
class Scenario:
    raw: dict
    text: str
    lines: dict = field(default_factory=dict)
    seed: int = 0

    @property
    def hash(self) -> str:
        return digest(json.dumps(self.raw, sort_keys=True, default=str))

    def line_of(self, path: str) -> str:
        line = self.lines.get(path)
        return f" (line {line})" if line else ""

    def get(self, path: str, default=None):
        node = self.raw
        for key in path.split("."):
            if not isinstance(node, dict) or key not in node:
                return default
            node = node[key]
        return node

    def with_overrides(self, overrides: dict, seed: int | None = None) -> Scenario:
        raw = copy.deepcopy(self.raw)
        for path, value in overrides.items():
            node = raw
            keys = path.split(".")
            for key in keys[:-1]:
                node = node.setdefault(key, {})
            node[keys[-1]] = value
        if seed is not None:
            raw["seed"] = seed
        return _validate(Scenario(raw, self.text, self.lines, int(raw.get("seed", 0))))


def _line_map(node, prefix="", out=None) -> dict:
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = f"{prefix}.{k.value}" if prefix else str(k.value)
            out[path] = k.start_mark.line + 1
            _line_map(v, path, out)
    return out


def parse_scenario(text: str) -> Scenario:
    try:
        raw = yaml.safe_load(text)
        lines = _line_map(yaml.compose(text))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark else ""
        raise ScenarioError(f"invalid YAML{where}: {getattr(exc, 'problem', exc)}") from None
    if not isinstance(raw, dict):
        raise ScenarioError("a scenario must be a mapping of sections")
    return _validate(Scenario(raw, text, lines, int(raw.get("seed", 0))))


def _validate(sc: Scenario) -> Scenario:
    raw = sc.raw
    version = raw.get("version", SCENARIO_VERSION)
    if version != SCENARIO_VERSION:
        raise ScenarioError(f"unsupported scenario version {version!r}{sc.line_of('version')}")
    planner = raw.get("planner", "simulate")
    if planner not in PLANNERS:
        raise ScenarioError(f"unknown planner {planner!r}{sc.line_of('planner')}; "
                            f"choose from {', '.join(PLANNERS)}")
    grid = raw.get("grid")
    if not isinstance(grid, dict) or "n" not in grid:
        raise ScenarioError(f"grid section needs 'n' (and optionally 'dim'){sc.line_of('grid')}")
    # resolve everything once so errors surface at parse time
    build(sc)
    return sc


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc.strerror}") from None
    return parse_scenario(text)


# --- building the objects -----------------------------------------------------------

@dataclass
class Built:
    grid: TorusGrid
    V: BackgroundPotential | None
    W0: State
    target: dict
    eps: float
    planner: str
    params: PlannerParams
    dt: float | None
    schedule: Schedule | None


def _field(sc: Scenario, grid, spec, path, rng) -> TorusField:
    if isinstance(spec, dict) and "random" in spec:
        opts = spec["random"] or {}
        try:
            f = random_field(grid, rng, int(opts.get("degree", 3)), float(opts.get("decay", 1.0)))
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"{path}: bad random field options ({exc}){sc.line_of(path)}") from None
        top = f.max_abs()
        f = f * (float(opts.get("scale", 1.0)) / top) if top > 0 else f
        return f + float(opts.get("offset", 0.0))
    try:
        return make_field(grid, spec if spec is not None else 0.0)
    except FieldSpecError as exc:
        raise ScenarioError(f"{path}: {exc}{sc.line_of(path)}") from None


def _number(v):
    """YAML 1.1 reads '1e-4' as a string; accept it as a float."""
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError:
            return v
    return v


def _dataclass_from(sc, cls, section: str, data: dict):
    data = data or {}
    unknown = set(data) - set(cls.__dataclass_fields__)
    if unknown:
        key = sorted(unknown)[0]
        raise ScenarioError(f"{section}: unknown key {key!r}{sc.line_of(section + '.' + key)}")
    try:
        clean = {k: tuple(_number(x) for x in v) if isinstance(v, list) else _number(v)
                 for k, v in data.items()}
        return cls(**clean)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{section}: {exc}{sc.line_of(section)}") from None


def build(sc: Scenario, dt: float | None = None) -> Built:
    raw = sc.raw
    rng = np.random.default_rng(sc.seed)
    g = raw["grid"]
    try:
        grid = TorusGrid(int(g.get("dim", 1)), int(g["n"]))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"grid: {exc}{sc.line_of('grid')}") from None
    V = None
    if raw.get("potential") is not None:
        V = BackgroundPotential(_field(sc, grid, raw["potential"], "potential", rng))
    init = raw.get("initial") or {}
    W0 = State(_field(sc, grid, init.get("profile"), "initial.profile", rng),
               _field(sc, grid, init.get("velocity"), "initial.velocity", rng))
    target: dict = {}
    for key, spec in (raw.get("target") or {}).items():
        if key == "phi" and spec in ("vanishing", "abs"):
            target[key] = spec  # recipe built from W0
        elif key in ("profile", "velocity", "phi"):
            target[key] = _field(sc, grid, spec, f"target.{key}", rng)
        elif key == "operator":
            target[key] = spec
        else:
            raise ScenarioError(f"target: unknown key {key!r}{sc.line_of('target.' + key)}")
    synth = _dataclass_from(sc, SynthesisParams, "synthesis", raw.get("synthesis"))
    pp = dict(raw.get("planner_params") or {})
    params = _dataclass_from(sc, PlannerParams, "planner_params", pp).with_(synthesis=synth)
    dt = dt if dt is not None else _number(raw.get("dt"))
    params = params.with_(dt=dt)
    schedule = None
    if raw.get("schedule") is not None:
        try:
            segs = tuple(Segment(float(s["duration"]), tuple(float(v) for v in s["u"]))
                         for s in raw["schedule"])
            schedule = Schedule(grid.dim, segs)
        except (TypeError, KeyError, ValueError) as exc:
            raise ScenarioError(f"schedule: {exc}{sc.line_of('schedule')}") from None
    eps = _number(raw.get("eps", 0.1))
    if not isinstance(eps, (int, float)) or isinstance(eps, bool) or not eps > 0:
        raise ScenarioError(f"eps must be a positive number{sc.line_of('eps')}")
    if raw.get("eps_relative"):
        ref = State(target.get("profile", W0.profile), target.get("velocity", W0.velocity))
        eps = eps * energy_norm(ref)
    return Built(grid, V, W0, target, float(eps), raw.get("planner", "simulate"), params, dt,
                 schedule)


# --- execution ------------------------------------------------------------------------

@dataclass
class RunResult:
    exit_code: int
    report: dict
    files: list[str]


def _target_state(b: Built) -> State:
    return State(b.target.get("profile", b.W0.profile), b.target.get("velocity", b.W0.velocity))


def _compile_operator(b: Built, tau_ladder=None):
    op = b.target.get("operator") or {}
    name = op.get("name")
    d = b.grid.dim
    synth = b.params.synthesis
    extra = {}
    if name == "expB":
        phi = make_field(b.grid, op.get("phi", "0"))
        poly = TrigPoly.from_field(phi, int(op.get("degree", 2)), kernel="dirichlet")
        if b.grid.n < required_resolution(poly):
            raise ScenarioError(f"grid.n must be at least {required_resolution(poly)} "
                                f"to synthesize {op.get('phi')!r}")
        cert = hierarchy_decompose(poly)
        knob, make = "tau", lambda p: compile_expB(cert, p)
        exact = exp_B(b.W0, poly.to_field(b.grid))
        extra["certificate"] = to_sexpr(cert)
    elif name == "expF":
        delta = float(op.get("delta", 0.0))
        method = op.get("method", "rotation")
        knob = "tau_bracket" if method == "bracket" else "tau"
        make = lambda p: compile_expF(delta, p, d, method, b.V)
        exact = exp_F(b.W0, -delta)
    elif name == "expBstar":
        a = float(op.get("a", 1.0))
        knob, make = "tau_dilation", lambda p: compile_expBstar(a, p, d, b.V)
        exact = exp_Bstar(b.W0, a)
    else:
        raise ScenarioError(f"target.operator.name must be expB, expF or expBstar, got {name!r}")
    if tau_ladder is None:
        return make(synth), exact, extra
    choice = select_tau(lambda t: make(replace(synth, **{knob: t})), b.W0, exact, tau_ladder,
                        b.params.time_budget, b.V, b.dt)
    extra["tau_selection"] = {"knob": knob, "chosen": choice.tau,
                              "tried": [{"tau": t, "error": e, "total_time": tt}
                                        for t, e, tt in choice.tried]}
    return choice.schedule, exact, extra


def run_scenario(sc: Scenario, out_dir=None, dt: float | None = None,
                 tau_ladder=None) -> RunResult:
    """Run the scenario's planner; tau_ladder (compile planner only) picks tau by simulation."""
    b = build(sc, dt)
    out = Path(out_dir or sc.get("output.dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    doc = {"scenario_hash": sc.hash, "seed": sc.seed, "planner": b.planner, "eps": b.eps,
           "parameters": {**b.params.as_dict(), "dt_rule": "min(duration, 2 pi / (4 N)); "
                          "duration / 64 when stiff"}}
    rep: PlanReport | None = None
    r_compare = None
    if b.planner == "simulate":
        sched = b.schedule or Schedule.empty(b.grid.dim)
        traj = simulate(b.W0, sched, b.V, b.dt)
        err = energy_norm(traj.final - _target_state(b)) if b.target else 0.0
        rep = PlanReport(sched, err, sched.total_time, final=traj.final)
    elif b.planner == "compile":
        sched, exact, extra = _compile_operator(b, tau_ladder)
        final = simulate(b.W0, sched, b.V, b.dt, keep=False).final if len(sched) else b.W0
        rep = PlanReport(sched, energy_norm(final - exact), sched.total_time, final=final, info=extra)
    elif b.planner == "velocity":
        rep = plan_velocity(b.W0, b.target["velocity"], b.eps, b.params, b.V)
    elif b.planner == "stac":
        rep = plan_stac(b.W0, _target_state(b), b.eps, b.params, b.V)
    elif b.planner == "reach_zero_phi":
        phi = b.target.get("phi")
        if phi == "vanishing":
            mask = state_zero_mask(b.W0, b.params.eta)
            if mask.full:
                raise ScenarioError("target.phi: 'vanishing' needs a nonzero initial state")
            phi = vanishing_profile(mask)
        elif not isinstance(phi, TorusField):
            raise ScenarioError("reach_zero_phi needs target.phi as a field or 'vanishing'")
        rep = plan_reach_zero_phi(b.W0, phi, b.eps, b.params, b.V)
    elif b.planner == "min_time":
        margin = _number(sc.get("margin"))
        rep = plan_min_time(b.W0, _target_state(b), b.eps, b.params, b.V,
                            None if margin is None else float(margin))
        r_compare = inscribed_radius(state_zero_mask(b.W0, b.params.eta))
    elif b.planner == "large_time":
        rep = plan_large_time(b.W0, _target_state(b), b.eps, b.params, b.V,
                              b.target.get("phi", "vanishing"))
    doc.update(plan_report_doc(rep, r_compare))
    files = []
    sched_path = out / "schedule.txt"
    write_schedule(sched_path, rep.schedule)
    files.append(str(sched_path))
    traj = simulate(b.W0, rep.schedule, b.V, b.dt) if len(rep.schedule) else None
    if traj is not None:
        tpath = out / "trajectory.txt"
        write_trajectory(tpath, traj)
        files.append(str(tpath))
    doc["schedule_file"] = sched_path.name
    doc["amplitude_cap"] = AMPLITUDE_CAP
    passed = rep.achieved_error <= b.eps and rep.ok
    doc["status"] = "ok" if passed else "flagged"
    rpath = out / "report.json"
    write_report(rpath, doc)
    files.append(str(rpath))
    return RunResult(0 if passed else 2, doc, files)
