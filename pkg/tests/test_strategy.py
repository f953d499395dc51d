"""Planners: hypothesis checks, stage bookkeeping, and small end-to-end plans."""

import math

import numpy as np
import pytest

from kgcontrol.fields import make_field, ramp_profile
from kgcontrol.grid import State, TorusField, TorusGrid, energy_norm
from kgcontrol.propagators import BackgroundPotential, Schedule, free_propagate, run
from kgcontrol.strategy import (PlannerParams, PlanRejected, PlanReport, best_multiplier,
                                large_time_bound, plan_large_time, plan_min_time,
                                plan_reach_zero_phi, plan_stac, plan_velocity, positivity_time,
                                select_a)
from kgcontrol.trigpoly import TrigPoly
from kgcontrol.zero_sets import zero_mask, zero_measure


@pytest.fixture
def mf(grid64):
    return lambda spec: make_field(grid64, spec)


def test_velocity_from_constant_profile(mf):
    rep = plan_velocity(State(mf(1), mf(0)), mf("sin(x)"), 0.05)
    assert rep.ok
    assert rep.info["phi"] == repr(TrigPoly.sin((1,)))
    assert rep.achieved_error < 0.05
    assert rep.total_time == rep.schedule.total_time


def test_velocity_exact_division_off_zero_set(mf):
    rep = plan_velocity(State(mf("sin(x)"), mf(0)), mf("sin(x)*cos(x)"), 0.05)
    assert rep.ok
    assert rep.info["phi"] == repr(TrigPoly.cos((1,)))
    assert rep.achieved_error < 1e-6


def test_velocity_hypothesis_failure_is_flagged(mf):
    rep = plan_velocity(State(mf("sin(x)"), mf(0)), mf(1), 0.05)
    assert not rep.ok
    assert "velocity change vanishes on Z(w0)" in rep.failed_checks()
    assert any(f.startswith("hypothesis") for f in rep.flags)


def test_velocity_identity(mf):
    rep = plan_velocity(State(mf("cos(x)"), mf("sin(x)")), mf("sin(x)"), 0.01)
    assert len(rep.schedule) == 0 and rep.achieved_error == 0.0


def test_best_multiplier_recovers_exact_phi(mf):
    w = mf("2 + cos(x)")
    phi = TrigPoly.constant(1, 0.5) + TrigPoly.sin((2,), -1.0)
    g = phi.to_field(w.grid) * w
    for s in (0.0, 1.0):
        assert best_multiplier(w, g, 2, s).allclose(phi, 1e-10)


def test_stac_example(mf):
    W0 = State(mf(1), mf(0))
    Wf = State(mf("1 + 0.2*cos(x)"), mf("0.1*sin(2*x)"))
    rep = plan_stac(W0, Wf, 0.1 * energy_norm(Wf))
    assert rep.ok
    assert rep.achieved_error < 0.1 * energy_norm(Wf)
    assert rep.total_time < 0.5
    assert energy_norm(run(W0, rep.schedule) - Wf) == pytest.approx(rep.achieved_error, rel=1e-9)


def test_stac_identity(mf):
    W = State(mf("1 + cos(x)"), mf(0))
    rep = plan_stac(W, W, 0.1)
    assert len(rep.schedule) == 0 and rep.achieved_error == 0.0


def test_stac_inserts_a_selection(mf):
    W0 = State(mf("sin(x)"), mf("cos(x)"))
    Wf = State(mf("1 + 0.2*cos(x)"), mf("0.1*sin(2*x)"))
    rep = plan_stac(W0, Wf, 0.1 * energy_norm(Wf))
    assert rep.stages[0].name == "select_a"
    assert "|Z(w0)| = 0" in rep.failed_checks()
    assert "|Z(W0)| = 0" not in rep.failed_checks()
    # degree-2 multipliers cannot resolve the profile zeros, but the plan still moves toward Wf
    assert rep.achieved_error < energy_norm(W0 - Wf)


def test_select_a_examples(mf):
    assert select_a(State(mf("sin(x)"), mf(0))) == 1.0
    a = select_a(State(mf("sin(x)"), mf("cos(x)")))
    assert a == pytest.approx(2.0 / 64)  # all scanned a tie; the smallest wins
    with pytest.raises(ValueError):
        select_a(State(mf(0), mf(0)))


def test_select_a_disjoint_arcs():
    g = TorusGrid(1, 256)
    f = TorusField(g, ramp_profile(g, 1.0, 0.4, 0.3))
    h = TorusField(g, ramp_profile(g, 4.0, 0.4, 0.3))
    W = State(f, h)
    a = select_a(W)
    assert a > 0
    assert zero_measure(zero_mask(f + a * h)) == 0.0
    assert select_a(W) == a


def test_reach_zero_phi(mf):
    w0 = mf("maximum(0, cos(x))**2")
    scale = energy_norm(State(mf(0), w0))
    rep = plan_reach_zero_phi(State(w0, mf(0)), abs(w0), 0.1 * scale)
    assert rep.ok
    assert rep.achieved_error < 0.1 * scale
    assert len([s for s in rep.stages if s.name.endswith("shear")]) == 2


def test_reach_zero_phi_hypothesis(mf):
    rep = plan_reach_zero_phi(State(mf("sin(x)"), mf(1)), abs(mf("sin(x)")), 0.1)
    assert "Z(w0) = Z(W0) = Z(phi)" in rep.failed_checks()


def test_reach_zero_phi_already_there(mf):
    W = State(mf(0), mf("1 + cos(x)"))
    rep = plan_reach_zero_phi(W, W.velocity, 0.1)
    assert len(rep.schedule) == 0


def test_positivity_time_arc():
    g = TorusGrid(1, 256)
    v = TorusField(g, ramp_profile(g, np.pi, 0.6, 0.3))
    t, info = positivity_time(v)
    assert 0.6 < t <= 0.7
    assert info["inscribed_radius"] == pytest.approx(0.6, abs=0.05)
    assert positivity_time(make_field(g, 1.0))[0] == pytest.approx(0.05)
    with pytest.raises(ValueError):
        positivity_time(make_field(g, "sin(x)"))


def test_positivity_time_ball_2d():
    g = TorusGrid(2, 128)
    v = TorusField(g, ramp_profile(g, [np.pi, np.pi], 0.6, 0.5))
    t, _ = positivity_time(v)
    assert 0.6 < t <= 0.7


def test_large_time_bound_direct_sum():
    g = TorusGrid(1, 32)
    # c_{+-1} = 1/4, so M = 1/4 + 1/4
    b = large_time_bound(make_field(g, "1 + 0.5*cos(x)"))
    assert b == pytest.approx({"M": 0.5, "c0": 1.0, "T1": 0.5})
    b = large_time_bound(make_field(g, "2 + 0.3*sin(2*x) + 0.1*cos(3*x)"))
    assert b["T1"] == pytest.approx((0.3 / 2 + 0.1 / 3) / 2)
    assert large_time_bound(make_field(g, 1.0))["T1"] == 0.0
    assert large_time_bound(make_field(g, "cos(x)"))["T1"] == math.inf


def test_large_time_bound_is_a_bound():
    g = TorusGrid(1, 64)
    v = make_field(g, "1 + 0.5*cos(x) + 0.4*sin(2*x)")
    T1 = large_time_bound(v)["T1"]
    W = State(TorusField.zeros(g), v)
    for t in np.linspace(T1 + 1e-3, T1 + 3, 7):
        assert free_propagate(W, t, massive=False).profile.physical.min() > 0


def test_large_time_rejects_zero_mean(mf):
    with pytest.raises(PlanRejected):
        plan_large_time(State(mf("sin(x)"), mf(0)), State(mf(1), mf(0)), 0.1, phi=mf("cos(x)"))


def test_large_time_vanishing_phi_meets_the_zero_set_hypothesis(mf):
    rep = plan_large_time(State(mf("sin(x)"), mf(0)), State(mf("1 + 0.2*cos(x)"), mf(0)), 0.5)
    checks = {c.name: c.passed for c in rep.checks}
    assert checks["prepare: Z(w0) = Z(W0) = Z(phi)"]
    assert checks["profile positive after T1"]


def test_large_time_phi_recipes(mf):
    W0, Wf = State(mf("sin(x)"), mf(0)), State(mf(1), mf(0))
    rep = plan_large_time(W0, Wf, 0.5, phi="abs")
    assert "prepare: Z(w0) = Z(W0) = Z(phi)" in rep.failed_checks()  # smoothing fills the zeros
    with pytest.raises(ValueError):
        plan_large_time(W0, Wf, 0.5, phi="bump")
    with pytest.raises(PlanRejected):
        plan_large_time(State(mf(0), mf(0)), Wf, 0.5)


def test_stac_stage_budget_excludes_the_final_error(mf):
    rep = plan_stac(State(mf("1 + 0.2*cos(x)"), mf(0)), State(mf("1 + 0.1*sin(x)"), mf(0)), 0.1)
    budget = sum(s.error for s in rep.stages if s.name in ("shear", "select_a")
                 or s.name.endswith("synthesis"))
    check = next(c for c in rep.checks if c.name == "error within stage budget")
    assert check.passed == (rep.achieved_error <= budget + 1e-15)
    assert rep.stages[-1].name == "final" and rep.stages[-1].error == rep.achieved_error


def test_min_time_rejections():
    g = TorusGrid(3, 8)
    W = State(make_field(g, 1.0), TorusField.zeros(g))
    with pytest.raises(PlanRejected, match="plan_large_time"):
        plan_min_time(W, W, 0.1)
    g1 = TorusGrid(1, 32)
    W = State(make_field(g1, 1.0), TorusField.zeros(g1))
    with pytest.raises(PlanRejected):
        plan_min_time(W, W, 0.1, V=BackgroundPotential(make_field(g1, "cos(x)")))


def test_min_time_without_zeros_is_stac(mf):
    W0 = State(mf(1), mf(0))
    Wf = State(mf("1 + 0.2*cos(x)"), mf("0.1*sin(2*x)"))
    rep = plan_min_time(W0, Wf, 0.1 * energy_norm(Wf))
    assert rep.info["r"] == 0.0
    assert not any(s.name == "free" for s in rep.stages)


def test_min_time_free_segment_and_positivity():
    g = TorusGrid(1, 256)
    W0 = State(TorusField.zeros(g), TorusField(g, ramp_profile(g, np.pi, 0.5, 0.25)))
    Wf = State(make_field(g, "1 + 0.2*cos(x)"), make_field(g, 0.0))
    rep = plan_min_time(W0, Wf, 0.5, margin=0.1)
    free = [s for s in rep.stages if s.name == "free"][0]
    assert "profile sign-definite after free segment" not in rep.failed_checks()
    assert free.error > 0
    assert rep.schedule.segments[0].u == (1.0, 0.0, 0.0)
    assert rep.schedule.segments[0].duration == pytest.approx(rep.info["r"] + 0.05)


def test_report_validates_time(mf):
    with pytest.raises(ValueError):
        PlanReport(Schedule.empty(1), 0.0, 1.0)


def test_params():
    with pytest.raises(ValueError):
        PlannerParams(projection="spline")
    assert PlannerParams().with_(degree=1).degree == 1
    d = PlannerParams().as_dict()
    assert d["lambdas"] == list(PlannerParams().lambdas) and "synthesis" in d


def test_velocity_rejects_aliasing_grids():
    g = TorusGrid(1, 8)
    W = State(make_field(g, 1.0), TorusField.zeros(g))
    with pytest.raises(PlanRejected, match="aliasing"):
        plan_velocity(W, make_field(g, "cos(3*x)"), 0.1, PlannerParams(degree=3))
