"""Numerical experiments: convergence rates, splitting order, finite speed, the 3D counterexample."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fields import make_field, random_field, ramp_profile, smooth_step
from .grid import State, TorusField, TorusGrid, energy_norm, periodic_distance
from .oracles import kirchhoff_eval
from .propagators import (BackgroundPotential, Schedule, Segment, evolve_segment, exp_B,
                          exp_Bstar, exp_F, free_propagate, simulate)
from .saturation import (Combine, Leaf, SynthesisParams, compile_expB, compile_expBstar,
                         compile_expF)
from .strategy import positivity_time

RATE_OPS = ("expB-leaf", "expB-square", "expF", "expBstar")

DEFAULT_LADDERS = {
    "expB-leaf": (1e-3, 1e-4, 1e-5),     # pulse time
    "expB-square": (1e-2, 1e-3, 1e-4),   # conjugation time
    "expF": (1e-1, 3e-2, 1e-2),          # bracket middle time
    "expBstar": (0.4, 0.2, 0.1),         # dilation factor
}

DEFAULT_STATES = {
    "expB-leaf": ("1 + 0.3*cos(x)", "0.2*sin(2*x)"),
    "expB-square": ("1 + 0.3*cos(x)", "0"),
    "expF": ("1 + 0.3*cos(x)", "0.2*sin(2*x)"),
    "expBstar": ("0", "cos(x)"),
}


@dataclass
class RateTable:
    op: str
    taus: list[float]
    errors: list[float]
    orders: list[float]
    total_times: list[float]
    monotone: bool
    info: dict = field(default_factory=dict)

    def rows(self):
        return list(zip(self.taus, self.errors, self.orders, self.total_times))


def _rate_pair(op: str, tau: float, W0: State, params: SynthesisParams, amount: float):
    """(compiled schedule, exact image of W0) for one ladder point."""
    grid = W0.grid
    d = grid.dim
    if op == "expB-leaf":
        alpha = np.zeros(2 * d + 1)
        alpha[1] = amount
        sched = compile_expB(Leaf(tuple(alpha)), params.with_(tau_leaf=tau))
        return sched, exp_B(W0, amount * np.sin(grid.coords[0]))
    if op == "expB-square":
        alpha = np.zeros(2 * d + 1)
        alpha[1] = amount
        cert = Combine(Leaf((0.0,) * (2 * d + 1)), (Leaf(tuple(alpha)),))
        sched = compile_expB(cert, params.with_(tau=tau))
        return sched, exp_B(W0, -(amount * np.sin(grid.coords[0])) ** 2)
    if op == "expF":
        sched = compile_expF(amount, params.with_(tau_bracket=tau), d, "bracket")
        return sched, exp_F(W0, -amount)
    if op == "expBstar":
        sched = compile_expBstar(amount, params.with_(tau_dilation=tau), d)
        return sched, exp_Bstar(W0, amount)
    raise ValueError(f"unknown operator {op!r}; choose from {RATE_OPS}")


def rates(op: str, taus=None, W0: State | None = None, grid: TorusGrid | None = None,
          params: SynthesisParams = SynthesisParams(), amount: float | None = None,
          dt: float | None = None) -> RateTable:
    """Error of the compiled operator against its exact action, over a decreasing ladder.

    amount is the leaf coefficient / square root coefficient (expB), delta (expF)
    or a (expBstar); defaults 1, 1, 0.5, 1.
    """
    if op not in RATE_OPS:
        raise ValueError(f"unknown operator {op!r}; choose from {RATE_OPS}")
    taus = list(DEFAULT_LADDERS[op] if taus is None else taus)
    if any(b >= a for a, b in zip(taus, taus[1:])):
        raise ValueError("the tau ladder must be strictly decreasing")
    if W0 is None:
        grid = grid or TorusGrid(1, 64)
        p, v = DEFAULT_STATES[op]
        W0 = State(make_field(grid, p), make_field(grid, v))
    if amount is None:
        amount = 0.5 if op == "expF" else 1.0
    scale = energy_norm(W0)
    errors, times = [], []
    for tau in taus:
        sched, exact = _rate_pair(op, tau, W0, params, amount)
        out = simulate(W0, sched, None, dt, keep=False).final if len(sched) else W0
        errors.append(energy_norm(out - exact) / scale)
        times.append(sched.total_time)
    orders = [math.nan]
    for k in range(1, len(taus)):
        if errors[k] > 0 and errors[k - 1] > 0:
            orders.append(math.log(errors[k - 1] / errors[k]) / math.log(taus[k - 1] / taus[k]))
        else:
            orders.append(math.nan)
    monotone = all(b < a for a, b in zip(errors, errors[1:]))
    return RateTable(op, taus, errors, orders, times, monotone, {"amount": amount})


# --- integrator checks -----------------------------------------------------------

def isometry_drift(grid: TorusGrid, rng: np.random.Generator, n_states: int = 200,
                   times=(0.1, 1.0, 7.0), degree: int = 16) -> float:
    """Largest relative change of energy_norm under the massive free flow."""
    worst = 0.0
    for _ in range(n_states):
        W = State(random_field(grid, rng, degree), random_field(grid, rng, degree))
        e0 = energy_norm(W)
        for t in times:
            worst = max(worst, abs(energy_norm(free_propagate(W, t)) - e0) / e0)
    return worst


def splitting_order(grid: TorusGrid | None = None, V: str = "cos(x)", u=(1.0, 0.3, -0.2),
                    duration: float = 1.0, dts=(0.2, 0.1, 0.05, 0.025, 0.0125), seed: int = 0):
    """Richardson study: orders log2(e(dt)/e(dt/2)) with e(dt) = |W_dt - W_dt/2|."""
    grid = grid or TorusGrid(1, 64)
    rng = np.random.default_rng(seed)
    W = State(random_field(grid, rng, 6), random_field(grid, rng, 6))
    pot = BackgroundPotential(make_field(grid, V))
    sols = [evolve_segment(W, pot, u, duration, dt) for dt in dts]
    diffs = [energy_norm(a - b) for a, b in zip(sols, sols[1:])]
    orders = [math.log(a / b) / math.log(dts[k] / dts[k + 1])
              for k, (a, b) in enumerate(zip(diffs, diffs[1:]))]
    return diffs, orders


# --- finite speed of propagation --------------------------------------------------

@dataclass
class ConeReport:
    radius: float
    times: list[float]
    leakage: list[float]
    threshold: float
    kind: str

    @property
    def passed(self) -> bool:
        return max(self.leakage) <= self.threshold


def localized_state(grid: TorusGrid, radius: float, center=None, width: float = 1.0) -> State:
    """Smooth state vanishing on the closed ball of the given radius."""
    center = np.pi if center is None else center
    ramp = ramp_profile(grid, center, radius, width)
    x = grid.coords
    shape_p = 1.0 + 0.5 * np.cos(x[0])
    shape_v = np.sin(x[0]) + 0.5
    return State(TorusField(grid, ramp * shape_p), TorusField(grid, ramp * shape_v))


def _local_energy(W: State, mask: np.ndarray) -> float:
    grads = W.profile.grad()
    dens = W.profile.physical**2 + W.velocity.physical**2 + sum(g**2 for g in grads)
    return float(math.sqrt(np.sum(dens[mask]) * W.grid.cell_volume))


def verify_finite_speed(grid: TorusGrid, radius: float = 1.0, rng: np.random.Generator | None = None,
                        amplitude: float = 5.0, pieces: int = 3, dt: float | None = 1e-3,
                        kind: str = "massive", zero_schedule: bool = False,
                        threshold: float = 1e-6, center=None) -> ConeReport:
    """Energy left inside the shrinking ball radius - t - 2 cells, relative to the total."""
    rng = rng if rng is not None else np.random.default_rng(0)
    center = np.pi if center is None else center
    W = localized_state(grid, radius, center)
    scale = energy_norm(W)
    dist = periodic_distance(grid, np.full(grid.dim, center))
    times = [f * radius for f in (0.2, 0.4, 0.6, 0.8)]
    nu = 2 * grid.dim + 1
    leak = []
    t_prev = 0.0
    for t in times:
        span = t - t_prev
        segs = []
        for _ in range(pieces):
            u = np.zeros(nu) if zero_schedule else rng.uniform(-amplitude, amplitude, nu)
            segs.append(Segment(span / pieces, tuple(u)))
        W = simulate(W, Schedule(grid.dim, tuple(segs)), None, dt, kind=kind, keep=False).final
        t_prev = t
        inner = dist <= radius - t - 2 * grid.spacing
        leak.append(_local_energy(W, inner) / scale)
    return ConeReport(radius, times, leak, threshold, kind)


# --- the 3D counterexample -------------------------------------------------------

@dataclass
class KirchhoffReport:
    r_inner: float
    half_width: float
    eps_t: float
    times: list[float]
    values: list[float]
    interval: tuple[float, float]
    required: tuple[float, float]
    value_after: float
    t_after: float
    contrast: dict

    @property
    def covers(self) -> bool:
        return self.interval[0] <= self.required[0] and self.interval[1] >= self.required[1]

    @property
    def passed(self) -> bool:
        return self.covers and self.value_after > 0


def shell_velocity(r_inner: float, half_width: float, center, soft: float | None = None):
    """Velocity vanishing exactly on the shell r_inner <= |y - c| <= r_inner + 2 half_width."""
    c = np.asarray(center, dtype=float)
    soft = soft if soft is not None else 0.5 * r_inner
    outer = r_inner + 2 * half_width

    def v(*ys):
        d2 = 0.0
        for y, ci in zip(ys, c):
            delta = np.abs(np.mod(y - ci + np.pi, 2 * np.pi) - np.pi)
            d2 = d2 + delta**2
        rho = np.sqrt(d2)
        return smooth_step((r_inner - rho) / soft) + smooth_step((rho - outer) / soft)
    return v


def kirchhoff_demo(r_inner: float = 0.3, half_width: float = 0.9, eps_t: float = 0.05,
                   t_step: float = 0.01, t_after: float = 2.3, tol: float = 1e-10,
                   contrast_n: int = 128) -> KirchhoffReport:
    """Massless wave from (0, v) in d = 3 with v vanishing on a thick shell around x0.

    w(t, x0) is t times the sphere average of v, which is zero while the sphere
    stays inside the shell, even though t exceeds the inscribed radius of the shell.
    """
    if not 0 < r_inner <= half_width:
        raise ValueError("need 0 < R' <= R")
    x0 = np.full(3, np.pi)
    v = shell_velocity(r_inner, half_width, x0)
    outer = r_inner + 2 * half_width
    t_end = max(t_after, outer) + 0.2
    times = [k * t_step for k in range(1, int(round(t_end / t_step)) + 1)]
    vals = [kirchhoff_eval(v, t, x0) for t in times]
    # longest run of vanishing values
    best, start = (math.nan, math.nan), None
    best_len = -1.0
    for t, val in zip(times + [math.inf], vals + [math.inf]):
        if abs(val) <= tol:
            start = t if start is None else start
            last = t
        elif start is not None:
            if last - start > best_len:
                best, best_len = (start, last), last - start
            start = None
    after = kirchhoff_eval(v, t_after, x0)
    contrast = {}
    for d in (1, 2):
        grid = TorusGrid(d, contrast_n if d == 1 else contrast_n // 2)
        vd = TorusField(grid, v(*grid.coords, *([np.pi] * (3 - d))))
        t_pos, info = positivity_time(vd)
        contrast[f"d{d}_positivity_time"] = t_pos
        contrast[f"d{d}_inscribed_radius"] = info["inscribed_radius"]
    return KirchhoffReport(r_inner, half_width, eps_t, times, vals, best,
                           (r_inner + eps_t, outer - eps_t), after, t_after, contrast)
