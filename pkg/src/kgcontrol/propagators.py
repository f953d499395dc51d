"""Flows of the controlled Klein-Gordon system  w'' = (Lap - 1 + V + sum_j u_j V_j) w.

The state W = (w, w') evolves under A + mB with A = [[0, 1], [Lap - 1, 0]],
B = [[0, 0], [1, 0]] and m the total potential.  Piecewise-constant controls
are integrated by Strang splitting whose two factors are both exact: the
spatial mean of m goes into a mode-wise rotation, and the zero-mean rest acts
through the nilpotent flow exp(s m B).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import State, TorusField, TorusGrid, energy_norm, lp_exponent, norm_hs, norm_lp

AMPLITUDE_CAP = 1e8
STIFF_STEPS = 64


class CapViolation(ValueError):
    pass


def control_basis(grid: TorusGrid) -> list[np.ndarray]:
    """V_0 = 1, V_{2j-1} = sin x_j, V_{2j} = cos x_j."""
    out = [np.ones(grid.shape)]
    for x in grid.coords:
        out += [np.sin(x), np.cos(x)]
    return out


def control_field(grid: TorusGrid, u: Sequence[float]) -> TorusField:
    u = np.asarray(u, dtype=float)
    if u.size != 2 * grid.dim + 1:
        raise ValueError(f"control vector must have length {2 * grid.dim + 1}, got {u.size}")
    return TorusField(grid, sum(c * v for c, v in zip(u, control_basis(grid)) if c != 0.0)
                      if np.any(u) else np.zeros(grid.shape))


@dataclass(frozen=True)
class Segment:
    duration: float
    u: tuple[float, ...]

    def __post_init__(self):
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ValueError(f"segment duration must be positive, got {self.duration}")
        object.__setattr__(self, "u", tuple(float(v) for v in self.u))


@dataclass(frozen=True)
class Schedule:
    dim: int
    segments: tuple[Segment, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        for s in self.segments:
            if len(s.u) != 2 * self.dim + 1:
                raise ValueError(f"control vector length {len(s.u)} != {2 * self.dim + 1}")

    @property
    def total_time(self) -> float:
        return math.fsum(s.duration for s in self.segments)

    @property
    def max_amplitude(self) -> float:
        return max((max(abs(v) for v in s.u) for s in self.segments), default=0.0)

    def __add__(self, other: Schedule) -> Schedule:
        if other.dim != self.dim:
            raise ValueError("cannot concatenate schedules of different dimension")
        return Schedule(self.dim, self.segments + other.segments)

    def __len__(self):
        return len(self.segments)

    @classmethod
    def empty(cls, dim: int) -> Schedule:
        return cls(dim, ())

    @classmethod
    def single(cls, dim: int, duration: float, u: Sequence[float]) -> Schedule:
        return cls(dim, (Segment(duration, tuple(u)),))


@dataclass(frozen=True)
class BackgroundPotential:
    V: TorusField
    lp_exponent: float = field(default=None)

    def __post_init__(self):
        if self.lp_exponent is None:
            object.__setattr__(self, "lp_exponent", lp_exponent(self.V.grid.dim))
        if not math.isfinite(norm_lp(self.V, self.lp_exponent)):
            raise ValueError("background potential must be finite")

    @classmethod
    def zero(cls, grid: TorusGrid) -> BackgroundPotential:
        return cls(TorusField.zeros(grid))


# --- mode-wise exact flows -------------------------------------------------

def dispersion(grid: TorusGrid, kind: str = "massive") -> np.ndarray:
    """Squared frequency of each Fourier mode for the drift."""
    if kind == "massive":
        return 1.0 + grid.k2
    if kind == "massless":
        return grid.k2.copy()
    if kind == "squared":
        # deliberately wrong dispersion <n>^4, used only to show the cone test can fail
        return (1.0 + grid.k2) ** 2
    raise ValueError(f"unknown dispersion {kind!r}")


def _flow_coefficients(lam: np.ndarray, t: float):
    """Entries of exp(t [[0, 1], [-lam, 0]]) for every mode, lam of any sign."""
    c = np.empty_like(lam)
    s = np.empty_like(lam)  # sin(wt)/w
    d = np.empty_like(lam)  # -w sin(wt)
    pos, neg, zero = lam > 0, lam < 0, lam == 0
    w = np.sqrt(lam[pos])
    c[pos], s[pos], d[pos] = np.cos(w * t), np.sin(w * t) / w, -w * np.sin(w * t)
    w = np.sqrt(-lam[neg])
    c[neg], s[neg], d[neg] = np.cosh(w * t), np.sinh(w * t) / w, w * np.sinh(w * t)
    # secular branch: w += t w', w' unchanged
    c[zero], s[zero], d[zero] = 1.0, t, 0.0
    return c, s, d


def _apply_modes(W: State, coeffs) -> State:
    c, s, d = coeffs
    a, b = W.profile.spectral, W.velocity.spectral
    grid = W.grid
    return State(TorusField.from_spectral(grid, c * a + s * b),
                 TorusField.from_spectral(grid, d * a + c * b))


def free_propagate(W: State, t: float, massive: bool = True, kind: str | None = None) -> State:
    """Exact drift flow; massless uses |n| and the secular zero mode."""
    if kind is None:
        kind = "massive" if massive else "massless"
    return _apply_modes(W, _flow_coefficients(dispersion(W.grid, kind), float(t)))


def exp_B(W: State, phi) -> State:
    """(w, w') -> (w, w' + phi w)."""
    phi = phi.physical if isinstance(phi, TorusField) else phi
    return State(W.profile, TorusField(W.grid, W.velocity.physical + phi * W.profile.physical))


def exp_Bstar(W: State, a: float) -> State:
    """(w, w') -> (w + a w', w')."""
    return State(W.profile + a * W.velocity, W.velocity)


def exp_F(W: State, delta: float) -> State:
    """(w, w') -> (e^-delta w, e^delta w')."""
    if abs(delta) > 50:
        raise ValueError(f"|delta| = {abs(delta)} exceeds the overflow guard 50")
    return State(W.profile * math.exp(-delta), W.velocity * math.exp(delta))


# --- piecewise-constant evolution --------------------------------------------

def default_dt(grid: TorusGrid, duration: float) -> float:
    return min(duration, 2 * np.pi / (4 * grid.n))


def _check_cap(u, cap=AMPLITUDE_CAP):
    amp = float(np.max(np.abs(u)))
    if amp > cap:
        raise CapViolation(f"control amplitude {amp:.3e} exceeds cap {cap:.1e}")


def _split_steps(duration: float, dt: float, stiffness: float) -> list[float]:
    if stiffness * duration >= 1.0:
        dt = min(dt, duration / STIFF_STEPS)
    n_full = max(1, math.ceil(duration / dt - 1e-12))
    last = duration - (n_full - 1) * dt
    if last <= 0:
        n_full -= 1
        last = duration - (n_full - 1) * dt
    return [dt] * (n_full - 1) + [last]


def _strang(W: State, m: TorusField, duration: float, dt: float, kind: str = "massive",
            reverse: bool = False) -> State:
    mean = m.mean()
    rest = m.physical - mean
    lam = dispersion(W.grid, kind) - mean
    stiffness = float(np.abs(rest).max())
    if stiffness <= 1e-14 * (1.0 + abs(mean)):
        t = -duration if reverse else duration
        return _apply_modes(W, _flow_coefficients(lam, t))
    steps = _split_steps(duration, dt, stiffness)
    if reverse:
        steps = [-s for s in reversed(steps)]
    cache = {}
    for s in steps:
        half = cache.get(s)
        if half is None:
            half = cache[s] = _flow_coefficients(lam, s / 2)
        W = _apply_modes(W, half)
        W = exp_B(W, s * rest)
        W = _apply_modes(W, half)
    return W


def _total_potential(grid, V, u):
    m = control_field(grid, u)
    if V is not None:
        m = m + (V.V if isinstance(V, BackgroundPotential) else V)
    return m


def evolve_segment(W: State, V: BackgroundPotential | None, u: Sequence[float], duration: float,
                   dt: float | None = None, kind: str = "massive",
                   cap: float = AMPLITUDE_CAP) -> State:
    if not duration > 0:
        raise ValueError(f"duration must be positive, got {duration}")
    if dt is None:
        dt = default_dt(W.grid, duration)
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    _check_cap(u, cap)
    return _strang(W, _total_potential(W.grid, V, u), duration, min(dt, duration), kind)


def evolve_segment_backward(W: State, V: BackgroundPotential | None, u: Sequence[float],
                            duration: float, dt: float | None = None,
                            kind: str = "massive") -> State:
    """Undo evolve_segment by running the mirrored step sequence with negative steps."""
    if dt is None:
        dt = default_dt(W.grid, duration)
    return _strang(W, _total_potential(W.grid, V, u), duration, min(dt, duration), kind,
                   reverse=True)


@dataclass
class Trajectory:
    times: list[float]
    states: list[State]

    @property
    def final(self) -> State:
        return self.states[-1]

    def summary_rows(self) -> list[tuple[float, float, float, float, float]]:
        return [(t, energy_norm(W), norm_hs(W.profile, 1.0), norm_hs(W.velocity, 0.0),
                 float(W.profile.physical.min())) for t, W in zip(self.times, self.states)]


def simulate(W: State, sched: Schedule, V: BackgroundPotential | None = None,
             dt: float | None = None, kind: str = "massive", keep: bool = True,
             cap: float = AMPLITUDE_CAP) -> Trajectory:
    """Run a schedule; records the state at every segment boundary (only the last if keep=False)."""
    if sched.dim != W.grid.dim:
        raise ValueError("schedule dimension does not match the state grid")
    times, states = [0.0], [W]
    t = 0.0
    for seg in sched.segments:
        step = dt if dt is not None else default_dt(W.grid, seg.duration)
        W = evolve_segment(W, V, seg.u, seg.duration, step, kind=kind, cap=cap)
        t += seg.duration
        if keep:
            times.append(t)
            states.append(W)
    if not keep:
        times, states = [t], [W]
    return Trajectory(times, states)


def run(W: State, sched: Schedule, V: BackgroundPotential | None = None,
        dt: float | None = None, **kw) -> State:
    return simulate(W, sched, V, dt, keep=False, **kw).final
