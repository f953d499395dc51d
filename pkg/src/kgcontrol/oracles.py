"""Classical representation formulas for the massless wave equation with zero profile.

These evaluate w(t, x) for initial data (0, v) by quadrature at single points,
without touching the FFT propagators, so they can cross-check them.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy import integrate

from .grid import TWO_PI, TorusField, evaluate


def _wrap(y):
    return np.mod(y, TWO_PI)


def _sampler(v, dim: int) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized evaluator taking points of shape (P, d)."""
    if isinstance(v, TorusField):
        if v.grid.dim != dim:
            raise ValueError(f"expected a field on T^{dim}, got d={v.grid.dim}")
        return lambda pts: evaluate(v, pts)
    if callable(v):
        return lambda pts: np.asarray(v(*_wrap(pts).T), dtype=float)
    raise TypeError("initial velocity must be a TorusField or a callable")


def dalembert_eval(v, t: float, x: float, method: str = "spectral") -> float:
    """w(t,x) = 1/2 * integral of v over [x - t, x + t] (d = 1)."""
    if isinstance(v, TorusField) and v.grid.dim != 1:
        raise ValueError("d'Alembert's formula needs d = 1")
    if method == "spectral":
        if not isinstance(v, TorusField):
            raise TypeError("spectral evaluation needs a TorusField")
        c = v.spectral
        n = v.grid.axis_freqs.astype(float)
        half = v.grid.n // 2
        total = c[0].real * t
        regular = (n != 0) & (np.abs(n) != half)
        total += np.sum(c[regular] * np.exp(1j * n[regular] * x) * np.sin(n[regular] * t)
                        / n[regular]).real
        nyq = np.abs(n) == half
        total += np.sum(c[nyq].real) * np.cos(half * x) * np.sin(half * t) / half
        return float(total)
    if method == "quadrature":
        f = _sampler(v, 1)
        # split the arc into pieces of length <= 0.5 and use Gauss-Legendre on each
        pieces = max(1, int(np.ceil(2 * t / 0.5)))
        edges = np.linspace(x - t, x + t, pieces + 1)
        nodes, weights = np.polynomial.legendre.leggauss(48)
        acc = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            y = 0.5 * (b - a) * nodes + 0.5 * (a + b)
            acc += 0.5 * (b - a) * np.dot(weights, f(y[:, None]))
        return float(0.5 * acc)
    if method == "adaptive":
        f = _sampler(v, 1)
        val, _ = integrate.quad(lambda y: float(f(np.array([[y]]))[0]), x - t, x + t, limit=200)
        return 0.5 * val
    raise ValueError(f"unknown method {method!r}")


def poisson_eval(v, t: float, x, n_radial: int = 64, n_angle: int = 128) -> float:
    """Poisson's formula on T^2, in polar coordinates with r = t sin(theta).

    w(t,x) = (1/2pi t^2) int_{B(x,t)} t^2 v(y) / sqrt(t^2 - |y-x|^2) dy
           = (1/2pi) int_0^{2pi} int_0^{pi/2} v(x + t sin(theta) e_phi) t sin(theta) dtheta dphi
    """
    if t <= 0:
        raise ValueError("Poisson's formula needs t > 0")
    f = _sampler(v, 2)
    nodes, weights = np.polynomial.legendre.leggauss(n_radial)
    theta = 0.25 * np.pi * (nodes + 1.0)
    wt = 0.25 * np.pi * weights
    phi = np.arange(n_angle) * TWO_PI / n_angle
    r = t * np.sin(theta)
    x = np.asarray(x, dtype=float)
    pts = np.stack([x[0] + np.outer(r, np.cos(phi)), x[1] + np.outer(r, np.sin(phi))], axis=-1)
    vals = f(pts.reshape(-1, 2)).reshape(r.size, n_angle)
    radial = vals.mean(axis=1) * t * np.sin(theta)
    return float(np.dot(wt, radial))


def kirchhoff_eval(v: Callable, t: float, x, n_theta: int = 48, n_phi: int = 96) -> float:
    """Kirchhoff's formula on T^3: t times the average of v over the sphere of radius t."""
    if t <= 0:
        raise ValueError("Kirchhoff's formula needs t > 0")
    if n_theta < 32 or n_phi < 64:
        raise ValueError("sphere quadrature needs at least 32 x 64 nodes")
    f = _sampler(v, 3)
    mu, wmu = np.polynomial.legendre.leggauss(n_theta)
    phi = np.arange(n_phi) * TWO_PI / n_phi
    s = np.sqrt(1.0 - mu**2)
    x = np.asarray(x, dtype=float)
    pts = np.stack([x[0] + t * np.outer(s, np.cos(phi)),
                    x[1] + t * np.outer(s, np.sin(phi)),
                    x[2] + t * np.outer(mu, np.ones(n_phi))], axis=-1)
    vals = f(pts.reshape(-1, 3)).reshape(n_theta, n_phi)
    return float(t * 0.5 * np.dot(wmu, vals.mean(axis=1)))
