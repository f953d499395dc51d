"""The closed-form field mini-language."""

import numpy as np
import pytest

from kgcontrol.fields import (FieldSpecError, arc_indicator, ball_indicator, make_field,
                              random_field, ramp_profile, smooth_step)
from kgcontrol.grid import TorusGrid


def test_expressions(grid64):
    x = grid64.coords[0]
    np.testing.assert_allclose(make_field(grid64, "1 + 0.2*cos(x)").physical, 1 + 0.2 * np.cos(x))
    np.testing.assert_allclose(make_field(grid64, "exp(sin(x))").physical, np.exp(np.sin(x)))
    np.testing.assert_allclose(make_field(grid64, 2.5).physical, 2.5)
    np.testing.assert_allclose(make_field(grid64, lambda y: y**2).physical, x**2)
    np.testing.assert_allclose(make_field(grid64, "fourier([2, 1.0, 0.5])").physical,
                               np.cos(2 * x) + 0.5 * np.sin(2 * x))


def test_two_dimensional_names():
    g = TorusGrid(2, 16)
    x1, x2 = g.coords
    np.testing.assert_allclose(make_field(g, "sin(x1 + 2*x2)").physical, np.sin(x1 + 2 * x2))


@pytest.mark.parametrize("spec", ["cos(0.5*x)", "sin(2.5*x + 1)", "nope(x)", "y + 1", "1 +", "'a'",
                                  "cos(40*x)"])
def test_rejected_expressions(grid64, spec):
    with pytest.raises(FieldSpecError):
        make_field(grid64, spec)


def test_nonlinear_arguments_pass_through(grid64):
    x = grid64.coords[0]
    np.testing.assert_allclose(make_field(grid64, "sin(cos(x))").physical, np.sin(np.cos(x)))


def test_smooth_step_limits():
    s = smooth_step(np.array([-1.0, 0.0, 0.5, 1.0, 2.0]))
    np.testing.assert_allclose(s, [0, 0, 0.5, 1, 1])


def test_ramp_vanishes_on_ball():
    g = TorusGrid(1, 256)
    r = ramp_profile(g, np.pi, 0.5, 0.25)
    d = np.abs(g.axis - np.pi)
    assert np.all(r[d <= 0.5] == 0)
    assert np.all(r[d >= 0.75] == 1)
    assert np.all(r[(d > 0.5) & (d < 0.75)] > 0)


def test_indicators():
    g = TorusGrid(1, 16)
    assert ball_indicator(g, 0.0, 0.5).sum() == 3
    assert arc_indicator(g, 0.0, np.pi).sum() == 9
    with pytest.raises(FieldSpecError):
        arc_indicator(TorusGrid(2, 16), 0.0, 1.0)


def test_random_field_band_limited(rng):
    g = TorusGrid(1, 64)
    f = random_field(g, rng, 4)
    k = np.abs(g.freqs[0])
    assert np.abs(f.spectral[k > 4]).max() < 1e-15
    assert np.abs(f.spectral[k <= 4]).max() > 0
