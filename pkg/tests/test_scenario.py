"""Scenario parsing diagnostics and execution."""

import json
from pathlib import Path

import pytest

from kgcontrol.reports import read_schedule
from kgcontrol.scenario import ScenarioError, build, load_scenario, parse_scenario, run_scenario

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"

VELOCITY = """
version: 1
grid: {dim: 1, n: 64}
initial: {profile: "1", velocity: "0"}
target: {velocity: "sin(x)"}
eps: 0.05
planner: velocity
"""


def test_parse_and_build():
    sc = parse_scenario(VELOCITY)
    b = build(sc)
    assert b.planner == "velocity"
    assert b.eps == 0.05
    assert b.grid.n == 64
    assert sc.line_of("eps") == " (line 6)"


@pytest.mark.parametrize("text, needle", [
    ("grid: {n: 64}\nplanner: nope\n", "unknown planner 'nope' (line 2)"),
    ("planner: velocity\n", "grid section"),
    ("grid: {n: 64}\ninitial: {profile: 'cos(0.5*x)'}\n", "initial.profile"),
    ("grid: {n: 64}\nsynthesis: {tau: 1e-4, bogus: 1}\n", "unknown key 'bogus' (line 2)"),
    ("grid: {n: 64}\neps: -1\n", "eps must be a positive number (line 2)"),
    ("grid: {n: 64\n", "invalid YAML"),
    ("- 1\n- 2\n", "mapping"),
    ("version: 7\ngrid: {n: 64}\n", "unsupported scenario version"),
    ("grid: {n: 63}\n", "grid:"),
    ("grid: {n: 64}\nschedule: [{duration: -1, u: [0, 0, 0]}]\n", "schedule"),
])
def test_parse_errors_name_the_field(text, needle):
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(text)
    assert needle in str(exc.value)


def test_scientific_notation_strings():
    sc = parse_scenario(VELOCITY + "synthesis: {tau: 1e-3}\n")
    assert build(sc).params.synthesis.tau == 1e-3


def test_overrides_and_seed():
    sc = parse_scenario(VELOCITY).with_overrides({"synthesis.tau": 1e-3, "eps": 0.2}, seed=9)
    b = build(sc)
    assert b.params.synthesis.tau == 1e-3 and b.eps == 0.2 and sc.seed == 9


def test_random_fields_follow_the_seed():
    text = ("grid: {n: 32}\ninitial: {profile: {random: {degree: 2, scale: 0.3, offset: 1}}}\n")
    a = build(parse_scenario(text)).W0.profile.physical
    b = build(parse_scenario(text)).W0.profile.physical
    c = build(parse_scenario(text + "seed: 5\n")).W0.profile.physical
    assert (a == b).all() and not (a == c).all()
    assert abs(a - 1).max() == pytest.approx(0.3)


def test_run_writes_reports(tmp_path):
    res = run_scenario(parse_scenario(VELOCITY), tmp_path)
    assert res.exit_code == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["status"] == "ok"
    assert doc["parameters"]["eta"] == 1e-6
    assert "dt_rule" in doc["parameters"]
    assert len(read_schedule(tmp_path / "schedule.txt")) == res.report["segments"]
    assert (tmp_path / "trajectory.txt").read_text().startswith("# kgcontrol-trajectory v1")


def test_run_is_deterministic(tmp_path):
    sc = load_scenario(SCENARIOS / "stac.yaml")
    run_scenario(sc, tmp_path / "a")
    run_scenario(sc, tmp_path / "b")
    for name in ("report.json", "schedule.txt", "trajectory.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.parametrize("name, code", [("velocity", 0), ("identity", 0), ("velocity_violation", 2),
                                        ("stac", 0), ("compile_cos2x", 0), ("simulate", 0)])
def test_bundled_scenarios(tmp_path, name, code):
    res = run_scenario(load_scenario(SCENARIOS / f"{name}.yaml"), tmp_path)
    assert res.exit_code == code
    if name == "identity":
        assert len(read_schedule(tmp_path / "schedule.txt")) == 0
        assert res.report["total_time"] == 0
