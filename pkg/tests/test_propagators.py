"""Exact flows and the splitting integrator, checked against closed forms and an ODE solver."""

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from kgcontrol.fields import make_field, random_field
from kgcontrol.grid import State, TorusField, TorusGrid, energy_norm
from kgcontrol.propagators import (AMPLITUDE_CAP, BackgroundPotential, CapViolation, Schedule,
                                   Segment, control_field, dispersion, evolve_segment,
                                   evolve_segment_backward, exp_B, exp_Bstar, exp_F,
                                   free_propagate, run, simulate)


def test_free_single_mode(grid64):
    x = grid64.coords[0]
    W = State(make_field(grid64, "cos(3*x)"), TorusField.zeros(grid64))
    t = 0.7
    om = math.sqrt(10.0)
    out = free_propagate(W, t)
    np.testing.assert_allclose(out.profile.physical, math.cos(om * t) * np.cos(3 * x), atol=1e-14)
    np.testing.assert_allclose(out.velocity.physical, -om * math.sin(om * t) * np.cos(3 * x),
                               atol=1e-13)


def test_massless_zero_mode_is_secular(grid64):
    W = State(make_field(grid64, 2.0), make_field(grid64, 0.5))
    out = free_propagate(W, 3.0, massive=False)
    np.testing.assert_allclose(out.profile.physical, 3.5)
    np.testing.assert_allclose(out.velocity.physical, 0.5)


def test_group_property(rng, grid64):
    W = State(random_field(grid64, rng, 8), random_field(grid64, rng, 8))
    a = free_propagate(free_propagate(W, 0.3), 0.9)
    b = free_propagate(W, 1.2)
    assert energy_norm(a - b) < 1e-13 * energy_norm(W)
    back = free_propagate(b, -1.2)
    assert energy_norm(back - W) < 1e-13 * energy_norm(W)


def test_exact_operators(smooth_state):
    W = smooth_state
    phi = np.sin(W.grid.coords[0])
    out = exp_B(W, phi)
    np.testing.assert_allclose(out.velocity.physical,
                               W.velocity.physical + phi * W.profile.physical)
    np.testing.assert_array_equal(out.profile.physical, W.profile.physical)
    out = exp_Bstar(W, 0.4)
    np.testing.assert_allclose(out.profile.physical,
                               W.profile.physical + 0.4 * W.velocity.physical)
    out = exp_F(W, 0.3)
    np.testing.assert_allclose(out.profile.physical, math.exp(-0.3) * W.profile.physical)
    np.testing.assert_allclose(out.velocity.physical, math.exp(0.3) * W.velocity.physical)
    with pytest.raises(ValueError):
        exp_F(W, 60.0)


def test_constant_potential_segment_is_exact(grid64):
    # u = (c, 0, 0): each mode oscillates at sqrt(1 + n^2 - c), with cosh for negative squares
    x = grid64.coords[0]
    W = State(make_field(grid64, "1 + cos(x)"), TorusField.zeros(grid64))
    c, t = 1.5, 0.8
    out = evolve_segment(W, None, (c, 0, 0), t, dt=t)
    kappa = math.sqrt(c - 1.0)
    om = math.sqrt(2.0 - c)
    exact = math.cosh(kappa * t) + math.cos(om * t) * np.cos(x)
    np.testing.assert_allclose(out.profile.physical, exact, atol=1e-13)


def _fourier_ode(W, m_phys, duration):
    """Reference solution of w'' = (Lap - 1 + m) w by an adaptive Runge-Kutta on grid values."""
    g = W.grid
    k2 = g.k2

    def rhs(_, y):
        n = g.size
        w, v = y[:n], y[n:]
        lap = np.fft.ifft(-k2 * np.fft.fft(w)).real
        return np.concatenate([v, lap - w + m_phys * w])

    y0 = np.concatenate([W.profile.physical, W.velocity.physical])
    sol = solve_ivp(rhs, (0, duration), y0, method="DOP853", rtol=1e-12, atol=1e-12)
    y = sol.y[:, -1]
    return State(TorusField(g, y[:g.size]), TorusField(g, y[g.size:]))


def test_variable_potential_against_ode_solver():
    g = TorusGrid(1, 16)
    W = State(make_field(g, "1 + 0.3*cos(x)"), make_field(g, "0.2*sin(x)"))
    V = BackgroundPotential(make_field(g, "cos(x)"))
    u = (1.0, 0.3, -0.2)
    ref = _fourier_ode(W, (V.V + control_field(g, u)).physical, 1.0)
    errs = [energy_norm(evolve_segment(W, V, u, 1.0, dt) - ref) for dt in (0.02, 0.01)]
    assert errs[1] < 2e-5 * energy_norm(W)
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_backward_undoes_forward(rng, grid64):
    W = State(random_field(grid64, rng, 6), random_field(grid64, rng, 6))
    V = BackgroundPotential(make_field(grid64, "0.5*sin(x)"))
    u = (0.2, 1.0, -0.4)
    fwd = evolve_segment(W, V, u, 0.6, 0.05)
    back = evolve_segment_backward(fwd, V, u, 0.6, 0.05)
    assert energy_norm(back - W) < 1e-12 * energy_norm(W)


def test_cap_violation(smooth_state):
    with pytest.raises(CapViolation):
        evolve_segment(smooth_state, None, (2 * AMPLITUDE_CAP, 0, 0), 1e-9)
    sched = Schedule.single(1, 1e-9, (0, 2 * AMPLITUDE_CAP, 0))
    with pytest.raises(CapViolation):
        simulate(smooth_state, sched)


def test_schedule_bookkeeping():
    s = Schedule(1, (Segment(0.1, (1, 0, 0)), Segment(0.2, (0, -3, 0))))
    assert s.total_time == pytest.approx(0.3)
    assert s.max_amplitude == 3
    assert len(s + s) == 4
    with pytest.raises(ValueError):
        Segment(0.0, (0, 0, 0))
    with pytest.raises(ValueError):
        Schedule(2, (Segment(0.1, (1, 0, 0)),))
    with pytest.raises(ValueError):
        s + Schedule.empty(2)


def test_trajectory_records_boundaries(smooth_state):
    s = Schedule(1, (Segment(0.1, (1, 0, 0)), Segment(0.2, (0, 0, 0))))
    traj = simulate(smooth_state, s)
    assert traj.times == pytest.approx([0.0, 0.1, 0.3])
    assert len(traj.summary_rows()) == 3
    assert energy_norm(traj.final - run(smooth_state, s)) == 0.0


def test_zero_control_equals_free_flow(rng, grid64):
    W = State(random_field(grid64, rng, 8), random_field(grid64, rng, 8))
    out = evolve_segment(W, None, (0, 0, 0), 1.3)
    assert energy_norm(out - free_propagate(W, 1.3)) < 1e-13 * energy_norm(W)


def test_dispersion_kinds(grid64):
    np.testing.assert_allclose(dispersion(grid64, "massless"), grid64.k2)
    np.testing.assert_allclose(dispersion(grid64, "squared"), (1 + grid64.k2) ** 2)
    with pytest.raises(ValueError):
        dispersion(grid64, "other")
