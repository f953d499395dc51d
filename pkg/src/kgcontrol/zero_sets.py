"""Grid versions of zero sets Z(f), their measure, and the inscribed radius r(f)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .fields import smooth_step
from .grid import State, TorusField, TorusGrid

DEFAULT_ETA = 1e-6


@dataclass(frozen=True)
class ZeroMask:
    grid: TorusGrid
    mask: np.ndarray
    threshold: float
    degenerate: bool = False  # built from an identically zero field

    def __post_init__(self):
        if self.mask.shape != self.grid.shape:
            raise ValueError("mask shape does not match grid")

    @property
    def full(self) -> bool:
        return bool(self.mask.all())

    @property
    def empty(self) -> bool:
        return not self.mask.any()

    def contains(self, other: ZeroMask) -> bool:
        """True when every point of `other` is also in this mask."""
        return bool(np.all(self.mask[other.mask]))

    def as_field(self) -> TorusField:
        return TorusField(self.grid, self.mask.astype(float))


def zero_mask(f: TorusField, eta: float = DEFAULT_ETA) -> ZeroMask:
    """Points where |f| <= eta * max|f|."""
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    a = np.abs(f.physical)
    top = a.max()
    if top == 0:
        return ZeroMask(f.grid, np.ones(f.grid.shape, dtype=bool), eta, degenerate=True)
    return ZeroMask(f.grid, a <= eta * top, eta)


def state_zero_mask(W: State, eta: float = DEFAULT_ETA) -> ZeroMask:
    """Common zeros of profile and velocity."""
    amp = np.sqrt(W.profile.physical**2 + W.velocity.physical**2)
    return zero_mask(TorusField(W.grid, amp), eta)


def zero_measure(m: ZeroMask) -> float:
    return float(np.count_nonzero(m.mask) * m.grid.cell_volume)


def _periodic_edt(mask: np.ndarray, grid: TorusGrid) -> np.ndarray:
    # distance from each True point to the nearest False point, tiled 3^d for periodicity
    tiled = np.tile(mask, (3,) * grid.dim)
    dist = ndimage.distance_transform_edt(tiled, sampling=grid.spacing)
    n = grid.n
    return dist[tuple(slice(n, 2 * n) for _ in range(grid.dim))]


def inscribed_radius(m: ZeroMask) -> float:
    """Largest distance from a masked point to the nearest unmasked point, on the torus.

    Exact Euclidean distance transform between grid points, made periodic by
    tiling the mask 3^d times.  A full mask returns the cap pi * sqrt(d).
    """
    if m.empty:
        return 0.0
    if m.full:
        return float(np.pi * np.sqrt(m.grid.dim))
    return float(_periodic_edt(m.mask, m.grid).max())


def vanishing_profile(m: ZeroMask, width: float | None = None) -> TorusField:
    """Smooth nonnegative field equal to 0 on the mask and 1 at distance >= width from it.

    width defaults to four grid spacings.  An empty mask gives the constant 1.
    """
    if m.full:
        raise ValueError("mask covers the whole torus")
    if width is None:
        width = 4 * m.grid.spacing
    if not width > 0:
        raise ValueError("width must be positive")
    if m.empty:
        return TorusField(m.grid, np.ones(m.grid.shape))
    dist = _periodic_edt(~m.mask, m.grid)
    return TorusField(m.grid, smooth_step(dist / width))
