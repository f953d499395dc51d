"""Uniform grids on the torus T^d = R^d / 2piZ^d and real fields held on them.

Fourier coefficients follow the normalization c_n(f) = (2pi)^-d * integral of
f e^{-in.x}, so that on the grid c = fftn(f) / N^d.  All norms carry the
(2pi)^d volume factor explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TorusGrid:
    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.n < 8 or self.n % 2:
            raise ValueError(f"points per axis must be even and >= 8, got {self.n}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def spacing(self) -> float:
        return TWO_PI / self.n

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def volume(self) -> float:
        return TWO_PI**self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def axis_freqs(self) -> np.ndarray:
        # fft ordering: 0, 1, ..., N/2-1, -N/2, ..., -1
        return np.fft.fftfreq(self.n, d=1.0 / self.n).round().astype(int)

    @cached_property
    def freqs(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis_freqs] * self.dim), indexing="ij"))

    @cached_property
    def k2(self) -> np.ndarray:
        """|n|^2 on the spectral grid."""
        return sum(f.astype(float) ** 2 for f in self.freqs)

    def index_of(self, n) -> tuple[int, ...]:
        """Array index of frequency n; rejects frequencies outside the representable box."""
        n = tuple(int(v) for v in np.atleast_1d(n))
        if len(n) != self.dim:
            raise ValueError(f"frequency {n} has wrong dimension for d={self.dim}")
        half = self.n // 2
        for v in n:
            if not (-half + 1 <= v <= half):
                raise ValueError(f"frequency {n} outside representable range [{-half + 1}, {half}]")
        return tuple(v % self.n for v in n)


class TorusField:
    """Real scalar field on a TorusGrid.

    The physical samples are the primary data; the spectral coefficients are
    derived on first access and cached.  Instances are treated as immutable.
    """

    def __init__(self, grid: TorusGrid, physical):
        values = np.asarray(physical, dtype=float)
        if values.shape == ():
            values = np.full(grid.shape, float(values))
        if values.shape != grid.shape:
            raise ValueError(f"field shape {values.shape} does not match grid {grid.shape}")
        values.setflags(write=False)
        self.grid = grid
        self.physical = values

    @classmethod
    def from_spectral(cls, grid: TorusGrid, coeffs) -> TorusField:
        c = np.asarray(coeffs, dtype=complex)
        # taking the real part is the Hermitian symmetrization c <- (c + conj(c[-n]))/2
        return cls(grid, np.fft.ifftn(c * grid.size).real)

    @classmethod
    def zeros(cls, grid: TorusGrid) -> TorusField:
        return cls(grid, np.zeros(grid.shape))

    @cached_property
    def spectral(self) -> np.ndarray:
        c = np.fft.fftn(self.physical) / self.grid.size
        c.setflags(write=False)
        return c

    def coeff(self, n) -> complex:
        return complex(self.spectral[self.grid.index_of(n)])

    def grad(self) -> tuple[np.ndarray, ...]:
        """Spectral gradient in physical space (Nyquist component dropped)."""
        out = []
        half = self.grid.n // 2
        for f in self.grid.freqs:
            mult = np.where(np.abs(f) == half, 0.0, f) * 1j
            out.append(np.fft.ifftn(mult * self.spectral * self.grid.size).real)
        return tuple(out)

    def mean(self) -> float:
        return float(self.physical.mean())

    def max_abs(self) -> float:
        return float(np.abs(self.physical).max())

    def _coerce(self, other):
        if isinstance(other, TorusField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.physical
        return other

    def __add__(self, other):
        return TorusField(self.grid, self.physical + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return TorusField(self.grid, self.physical - self._coerce(other))

    def __rsub__(self, other):
        return TorusField(self.grid, self._coerce(other) - self.physical)

    def __mul__(self, other):
        return TorusField(self.grid, self.physical * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return TorusField(self.grid, self.physical / self._coerce(other))

    def __neg__(self):
        return TorusField(self.grid, -self.physical)

    def __abs__(self):
        return TorusField(self.grid, np.abs(self.physical))

    def __repr__(self):
        return f"TorusField(dim={self.grid.dim}, N={self.grid.n}, max={self.max_abs():.3g})"


@dataclass(frozen=True)
class State:
    """The pair W = (w, dw/dt)."""

    profile: TorusField
    velocity: TorusField

    def __post_init__(self):
        if self.profile.grid != self.velocity.grid:
            raise ValueError("profile and velocity must share one grid")

    @property
    def grid(self) -> TorusGrid:
        return self.profile.grid

    @classmethod
    def zeros(cls, grid: TorusGrid) -> State:
        z = TorusField.zeros(grid)
        return cls(z, z)

    def __add__(self, other: State) -> State:
        return State(self.profile + other.profile, self.velocity + other.velocity)

    def __sub__(self, other: State) -> State:
        return State(self.profile - other.profile, self.velocity - other.velocity)

    def __mul__(self, s: float) -> State:
        return State(self.profile * s, self.velocity * s)

    __rmul__ = __mul__


def norm_hs(f: TorusField, s: float = 0.0) -> float:
    if s < 0:
        raise ValueError("s must be nonnegative")
    weight = (1.0 + f.grid.k2) ** s
    return float(np.sqrt(f.grid.volume * np.sum(weight * np.abs(f.spectral) ** 2)))


def norm_lp(f: TorusField, p: float = 2.0) -> float:
    if p < 1:
        raise ValueError(f"L^p norm needs p >= 1, got {p}")
    a = np.abs(f.physical)
    if np.isinf(p):
        return float(a.max())
    return float((np.sum(a**p) * f.grid.cell_volume) ** (1.0 / p))


def energy_norm(W: State) -> float:
    """(||w||_{H^1}^2 + ||dw||_{L^2}^2)^{1/2}, computed from Fourier coefficients."""
    return float(np.hypot(norm_hs(W.profile, 1.0), norm_hs(W.velocity, 0.0)))


def energy_norm_physical(W: State) -> float:
    """Same quantity by grid quadrature with a spectral gradient."""
    w = W.profile.physical
    dens = w**2 + W.velocity.physical**2 + sum(g**2 for g in W.profile.grad())
    return float(np.sqrt(np.sum(dens) * W.grid.cell_volume))


def fourier_coeff(f: TorusField, n) -> complex:
    return f.coeff(n)


def lp_exponent(dim: int) -> float:
    """Integrability exponent required of the potential: 2 in d=1, 3 in d=2, d beyond."""
    return {1: 2.0, 2: 3.0}.get(dim, float(dim))


def periodic_distance(grid: TorusGrid, center) -> np.ndarray:
    """Euclidean distance on the torus from every grid point to `center`."""
    center = np.broadcast_to(np.asarray(center, dtype=float), (grid.dim,))
    sq = np.zeros(grid.shape)
    for x, c in zip(grid.coords, center):
        diff = np.abs((x - c + np.pi) % TWO_PI - np.pi)
        sq += diff**2
    return np.sqrt(sq)


def evaluate(f: TorusField, points) -> np.ndarray:
    """Evaluate the trigonometric interpolant of f at arbitrary points, shape (P, d).

    Works axis by axis so the cost is P * N^d without building a P x N^d matrix;
    this path never calls an inverse FFT and serves as an independent check on
    the spectral propagators.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != f.grid.dim:
        raise ValueError("points must have shape (P, d)")
    n = f.grid.n
    half = n // 2
    k = f.grid.axis_freqs.astype(float)
    c = f.spectral.copy()
    # split the Nyquist coefficient evenly between +N/2 and -N/2 so the interpolant is real
    phases = [np.exp(1j * np.outer(pts[:, i], k)) for i in range(f.grid.dim)]
    nyq = np.abs(f.grid.axis_freqs) == half
    for ph, x in zip(phases, pts.T):
        ph[:, nyq] = np.cos(half * x)[:, None]
    if f.grid.dim == 1:
        vals = phases[0] @ c
    elif f.grid.dim == 2:
        vals = np.einsum("pi,pi->p", phases[0] @ c, phases[1])
    else:
        tmp = np.einsum("pi,ijk->pjk", phases[0], c)
        tmp = np.einsum("pjk,pj->pk", tmp, phases[1])
        vals = np.einsum("pk,pk->p", tmp, phases[2])
    return vals.real
