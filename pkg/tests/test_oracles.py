"""Representation formulas against closed-form solutions and the spectral flow."""

import math

import numpy as np
import pytest

from kgcontrol.fields import make_field, random_field
from kgcontrol.grid import State, TorusField, TorusGrid
from kgcontrol.oracles import dalembert_eval, kirchhoff_eval, poisson_eval
from kgcontrol.propagators import free_propagate


@pytest.mark.parametrize("method", ["spectral", "quadrature", "adaptive"])
def test_dalembert_single_mode(grid64, method):
    # (0, cos 3x) evolves to sin(3t) cos(3x) / 3 under the massless flow
    v = make_field(grid64, "cos(3*x)")
    t, x = 0.9, 0.4
    val = dalembert_eval(v, t, x, method)
    assert val == pytest.approx(math.sin(3 * t) * math.cos(3 * x) / 3, abs=1e-12)


def test_dalembert_matches_flow(rng, grid64):
    v = random_field(grid64, rng, 10)
    w = free_propagate(State(TorusField.zeros(grid64), v), 1.1, massive=False).profile
    for i in (0, 7, 40):
        x = grid64.axis[i]
        assert dalembert_eval(v, 1.1, x) == pytest.approx(w.physical[i], abs=1e-13)
        assert dalembert_eval(v, 1.1, x, "quadrature") == pytest.approx(w.physical[i], abs=1e-12)


def test_dalembert_rejects_bad_input():
    with pytest.raises(ValueError):
        dalembert_eval(TorusField.zeros(TorusGrid(2, 8)), 1.0, 0.0)
    with pytest.raises(TypeError):
        dalembert_eval(lambda y: y, 1.0, 0.0)
    with pytest.raises(ValueError):
        dalembert_eval(make_field(TorusGrid(1, 8), 1.0), 1.0, 0.0, "simpson")


def test_poisson_constant_and_mode():
    g = TorusGrid(2, 32)
    # constant velocity c gives w = c t
    assert poisson_eval(make_field(g, 2.0), 0.8, [1.0, 2.0]) == pytest.approx(1.6, rel=1e-12)
    v = make_field(g, "cos(x1 + x2)")
    t = 0.6
    w = free_propagate(State(TorusField.zeros(g), v), t, massive=False).profile
    i, j = 5, 11
    x = [g.axis[i], g.axis[j]]
    assert poisson_eval(v, t, x) == pytest.approx(w.physical[i, j], abs=1e-9)


def test_kirchhoff_constant_and_mode():
    one = lambda *y: np.ones_like(y[0])
    assert kirchhoff_eval(one, 1.7, [0, 0, 0]) == pytest.approx(1.7, rel=1e-13)
    # (0, cos x1) gives sin(t) cos(x1)
    mode = lambda *y: np.cos(y[0])
    t, x = 0.8, [0.3, 1.0, 2.0]
    assert kirchhoff_eval(mode, t, x) == pytest.approx(math.sin(t) * math.cos(0.3), abs=1e-12)
    with pytest.raises(ValueError):
        kirchhoff_eval(one, 1.0, [0, 0, 0], n_theta=8)
    with pytest.raises(ValueError):
        kirchhoff_eval(one, 0.0, [0, 0, 0])
