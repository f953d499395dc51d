"""Sparse real trigonometric polynomials on T^d.

A TrigPoly stores  const + sum_n a_n cos(n.x) + b_n sin(n.x)  over canonical
frequencies n (first nonzero entry positive).
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .grid import TorusField, TorusGrid


def canonical(n) -> tuple[tuple[int, ...], int]:
    """Canonical representative of +-n and the sign flip applied to reach it."""
    n = tuple(int(v) for v in n)
    for v in n:
        if v != 0:
            return (n, 1) if v > 0 else (tuple(-w for w in n), -1)
    return n, 1


@dataclass(frozen=True)
class TrigPoly:
    dim: int
    const: float = 0.0
    terms: dict = field(default_factory=dict)  # canonical n -> (cos coeff, sin coeff)

    @classmethod
    def zero(cls, dim: int) -> TrigPoly:
        return cls(dim)

    @classmethod
    def constant(cls, dim: int, c: float) -> TrigPoly:
        return cls(dim, float(c))

    @classmethod
    def cos(cls, n, coeff: float = 1.0) -> TrigPoly:
        n, _ = canonical(n)
        return cls._single(n, coeff, 0.0)

    @classmethod
    def sin(cls, n, coeff: float = 1.0) -> TrigPoly:
        n, s = canonical(n)
        return cls._single(n, 0.0, s * coeff)

    @classmethod
    def _single(cls, n, a, b) -> TrigPoly:
        if not any(n):
            return cls(len(n), float(a))
        return cls(len(n), 0.0, {n: (float(a), float(b))})

    @classmethod
    def from_leaf(cls, alpha) -> TrigPoly:
        """alpha_0 + sum_j alpha_{2j-1} sin x_j + alpha_{2j} cos x_j."""
        alpha = [float(a) for a in alpha]
        dim = (len(alpha) - 1) // 2
        terms = {}
        for j in range(dim):
            e = tuple(int(i == j) for i in range(dim))
            if alpha[2 * j + 1] or alpha[2 * j + 2]:
                terms[e] = (alpha[2 * j + 2], alpha[2 * j + 1])
        return cls(dim, alpha[0], terms)

    # --- complex bridge ---------------------------------------------------
    def to_complex(self) -> dict:
        out = {}
        if self.const:
            out[(0,) * self.dim] = complex(self.const)
        for n, (a, b) in self.terms.items():
            neg = tuple(-v for v in n)
            out[n] = out.get(n, 0) + 0.5 * (a - 1j * b)
            out[neg] = out.get(neg, 0) + 0.5 * (a + 1j * b)
        return out

    @classmethod
    def from_complex(cls, dim: int, coeffs: dict, tol: float = 0.0) -> TrigPoly:
        const = 0.0
        acc = defaultdict(lambda: [0.0, 0.0])
        for n, c in coeffs.items():
            if not any(n):
                const += c.real
                continue
            m, s = canonical(n)
            # c e^{in.x} with n = s m adds Re(c) cos(m.x) - s Im(c) sin(m.x)
            acc[m][0] += c.real
            acc[m][1] += -s * c.imag
        terms = {n: (a, b) for n, (a, b) in acc.items() if abs(a) > tol or abs(b) > tol}
        return cls(dim, const, terms)

    # --- algebra ----------------------------------------------------------
    def __add__(self, other: TrigPoly) -> TrigPoly:
        terms = dict(self.terms)
        for n, (a, b) in other.terms.items():
            a0, b0 = terms.get(n, (0.0, 0.0))
            terms[n] = (a0 + a, b0 + b)
        return TrigPoly(self.dim, self.const + other.const, terms)

    def __neg__(self) -> TrigPoly:
        return self.scale(-1.0)

    def __sub__(self, other: TrigPoly) -> TrigPoly:
        return self + (-other)

    def scale(self, s: float) -> TrigPoly:
        return TrigPoly(self.dim, s * self.const,
                        {n: (s * a, s * b) for n, (a, b) in self.terms.items()})

    __rmul__ = scale

    def __mul__(self, other):
        if not isinstance(other, TrigPoly):
            return self.scale(float(other))
        left, right = self.to_complex(), other.to_complex()
        prod = defaultdict(complex)
        for n, c in left.items():
            for m, d in right.items():
                prod[tuple(i + j for i, j in zip(n, m))] += c * d
        return TrigPoly.from_complex(self.dim, prod)

    def square(self) -> TrigPoly:
        return self * self

    # --- inspection -------------------------------------------------------
    @property
    def degree(self) -> int:
        return max((sum(abs(v) for v in n) for n in self.terms), default=0)

    @property
    def max_frequency(self) -> int:
        return max((max(abs(v) for v in n) for n in self.terms), default=0)

    def pruned(self, tol: float = 1e-14) -> TrigPoly:
        return TrigPoly(self.dim, self.const if abs(self.const) > tol else 0.0,
                        {n: (a if abs(a) > tol else 0.0, b if abs(b) > tol else 0.0)
                         for n, (a, b) in self.terms.items() if abs(a) > tol or abs(b) > tol})

    def max_coeff(self) -> float:
        vals = [abs(self.const)] + [max(abs(a), abs(b)) for a, b in self.terms.values()]
        return max(vals)

    def allclose(self, other: TrigPoly, tol: float = 1e-12) -> bool:
        return (self - other).max_coeff() <= tol

    def is_leaf(self, tol: float = 0.0) -> bool:
        p = self.pruned(tol)
        return all(sum(n) == 1 and max(n) == 1 and min(n) >= 0 for n in p.terms)

    def leaf_vector(self) -> np.ndarray:
        if not self.is_leaf():
            raise ValueError("polynomial is not in the span of the control potentials")
        alpha = np.zeros(2 * self.dim + 1)
        alpha[0] = self.const
        for n, (a, b) in self.terms.items():
            j = n.index(1)
            alpha[2 * j + 1] += b
            alpha[2 * j + 2] += a
        return alpha

    # --- grids ------------------------------------------------------------
    def values(self, grid: TorusGrid) -> np.ndarray:
        if grid.dim != self.dim:
            raise ValueError("grid dimension mismatch")
        if self.max_frequency > grid.n // 2:
            raise ValueError(f"frequency {self.max_frequency} not representable on N={grid.n}")
        out = np.full(grid.shape, self.const)
        for n, (a, b) in self.terms.items():
            phase = sum(k * x for k, x in zip(n, grid.coords))
            out = out + a * np.cos(phase) + b * np.sin(phase)
        return out

    def to_field(self, grid: TorusGrid) -> TorusField:
        return TorusField(grid, self.values(grid))

    @classmethod
    def from_field(cls, f: TorusField, degree: int, kernel: str = "fejer",
                   tol: float = 1e-15) -> TrigPoly:
        """Trigonometric projection of f on the box |n_i| <= degree.

        kernel 'fejer' weights c_n by prod_i (1 - |n_i|/(degree+1)); 'dirichlet'
        keeps c_n unweighted (plain truncation).
        """
        grid = f.grid
        if degree >= grid.n // 2:
            raise ValueError(f"degree {degree} needs N > {2 * degree}")
        weight = np.ones(grid.shape)
        for k in grid.freqs:
            if kernel == "fejer":
                weight = weight * np.clip(1.0 - np.abs(k) / (degree + 1.0), 0.0, None)
            elif kernel == "dirichlet":
                weight = weight * (np.abs(k) <= degree)
            else:
                raise ValueError(f"unknown kernel {kernel!r}")
        c = f.spectral * weight
        idx = np.nonzero(np.abs(c) > tol)
        coeffs = {}
        for pos in zip(*idx):
            n = tuple(int(grid.axis_freqs[p]) for p in pos)
            coeffs[n] = complex(c[pos])
        return cls.from_complex(grid.dim, coeffs, tol=tol)

    def __repr__(self):
        parts = [f"{self.const:+.4g}"] if self.const else []
        for n, (a, b) in sorted(self.terms.items()):
            if a:
                parts.append(f"{a:+.4g}cos{n}")
            if b:
                parts.append(f"{b:+.4g}sin{n}")
        return "TrigPoly(" + (" ".join(parts) or "0") + ")"


def fejer_approx(f: TorusField, m: int) -> TrigPoly:
    return TrigPoly.from_field(f, m, kernel="fejer")
