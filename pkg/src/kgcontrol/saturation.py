"""Saturation certificates and their compilation into control schedules.

Every trigonometric polynomial phi is written as phi = phi0 - sum_i phi_i^2
recursively until all leaves lie in Span{1, sin x_j, cos x_j}, the directions
the controls act along.  A certificate is then lowered to a schedule:

    leaf alpha        one short pulse (t, alpha / t)             ~ exp(alpha B)
    square -psi^2     pulse psi/sqrt(tau), drift tau, pulse -psi/sqrt(tau)
                                                                 ~ exp(-psi^2 B)

and the two dilation blocks exp(dF), exp(aB*) are assembled from those pieces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from .grid import energy_norm
from .propagators import (AMPLITUDE_CAP, BackgroundPotential, CapViolation, Schedule, Segment,
                          simulate)
from .trigpoly import TrigPoly, canonical


# --- certificates -------------------------------------------------------------

@dataclass(frozen=True)
class Leaf:
    alpha: tuple[float, ...]

    @property
    def dim(self) -> int:
        return (len(self.alpha) - 1) // 2

    @property
    def level(self) -> int:
        return 0

    def expand(self) -> TrigPoly:
        return TrigPoly.from_leaf(self.alpha)

    def is_zero(self) -> bool:
        return not any(self.alpha)

    def __len__(self):
        return 1


@dataclass(frozen=True)
class Combine:
    """phi = phi0 - sum(s^2 for s in squares)."""

    phi0: "Certificate"
    squares: tuple["Certificate", ...]

    @property
    def dim(self) -> int:
        return self.phi0.dim

    @property
    def level(self) -> int:
        return 1 + max([self.phi0.level] + [s.level for s in self.squares])

    def expand(self) -> TrigPoly:
        out = self.phi0.expand()
        for s in self.squares:
            out = out - s.expand().square()
        return out

    def is_zero(self) -> bool:
        return False

    def __len__(self):
        return 1 + len(self.phi0) + sum(len(s) for s in self.squares)


Certificate = Union[Leaf, Combine]


def _leaf(dim: int, **entries) -> Leaf:
    alpha = [0.0] * (2 * dim + 1)
    for k, v in entries.items():
        alpha[int(k[1:])] = v
    return Leaf(tuple(alpha))


def add_certificates(a: Certificate, b: Certificate) -> Certificate:
    if isinstance(a, Leaf) and isinstance(b, Leaf):
        return Leaf(tuple(x + y for x, y in zip(a.alpha, b.alpha)))
    if isinstance(a, Leaf):
        a, b = b, a
    if isinstance(b, Leaf):
        return Combine(add_certificates(a.phi0, b), a.squares)
    return Combine(add_certificates(a.phi0, b.phi0), a.squares + b.squares)


def scale_certificate(c: Certificate, s: float) -> Certificate:
    """Certificate of s * phi.

    Nonnegative s scales leaves by s and square factors by sqrt(s), which is
    exact; a negative s flips the sign of the squares, so the polynomial is
    decomposed afresh instead.
    """
    if isinstance(c, Leaf):
        return Leaf(tuple(s * a for a in c.alpha))
    if s >= 0:
        r = math.sqrt(s)
        return Combine(scale_certificate(c.phi0, s), tuple(scale_certificate(q, r) for q in c.squares))
    return hierarchy_decompose(c.expand().scale(s))


def _unit(dim: int, j: int) -> tuple[int, ...]:
    return tuple(int(i == j) for i in range(dim))


def _trig_certificate(kind: str, sign: int, n: tuple[int, ...]) -> Certificate:
    """Certificate of sign * cos(n.x) or sign * sin(n.x) for any nonzero n."""
    dim = len(n)
    m, flip = canonical(n)
    if kind == "sin":
        sign *= flip
    n = m
    if sum(abs(v) for v in n) == 1:
        j = [i for i, v in enumerate(n) if v][0]
        slot = 2 * j + 1 if kind == "sin" else 2 * j + 2
        return _leaf(dim, **{f"a{slot}": float(sign)})
    j = next(i for i, v in enumerate(n) if v > 0)
    k = tuple(v - int(i == j) for i, v in enumerate(n))
    s = sign
    sin_j = 2 * j + 1
    cos_j = 2 * j + 2
    if kind == "cos":
        # s cos(k.x + x_j) = 1 - 1/2 (cos k.x - s cos x_j)^2 - 1/2 (sin k.x + s sin x_j)^2
        f1 = add_certificates(_trig_certificate("cos", 1, k), _leaf(dim, **{f"a{cos_j}": -s}))
        f2 = add_certificates(_trig_certificate("sin", 1, k), _leaf(dim, **{f"a{sin_j}": s}))
    else:
        # s sin(k.x + x_j) = 1 - 1/2 (sin k.x - s cos x_j)^2 - 1/2 (cos k.x - s sin x_j)^2
        f1 = add_certificates(_trig_certificate("sin", 1, k), _leaf(dim, **{f"a{cos_j}": -s}))
        f2 = add_certificates(_trig_certificate("cos", 1, k), _leaf(dim, **{f"a{sin_j}": -s}))
    r = math.sqrt(0.5)
    squares = tuple(scale_certificate(f, r) for f in (f1, f2) if not f.is_zero())
    return Combine(_leaf(dim, a0=1.0), squares)


def hierarchy_decompose(phi: TrigPoly, tol: float = 0.0) -> Certificate:
    phi = phi.pruned(tol) if tol else phi
    dim = phi.dim
    low = TrigPoly(dim, phi.const, {n: ab for n, ab in phi.terms.items() if sum(map(abs, n)) == 1})
    cert: Certificate = Leaf(tuple(low.leaf_vector()))
    for n in sorted(phi.terms, key=lambda n: (sum(map(abs, n)), n)):
        if sum(map(abs, n)) == 1:
            continue
        for kind, coeff in zip(("cos", "sin"), phi.terms[n]):
            if coeff == 0:
                continue
            sign = 1 if coeff > 0 else -1
            term = scale_certificate(_trig_certificate(kind, sign, n), abs(coeff))
            cert = add_certificates(cert, term)
    return cert


def leaves(c: Certificate) -> list[Leaf]:
    if isinstance(c, Leaf):
        return [c]
    out = leaves(c.phi0)
    for s in c.squares:
        out += leaves(s)
    return out


# --- s-expression serialization ---------------------------------------------

def to_sexpr(c: Certificate) -> str:
    if isinstance(c, Leaf):
        return "(leaf " + " ".join(repr(float(a)) for a in c.alpha) + ")"
    inner = " ".join(to_sexpr(s) for s in c.squares)
    return f"(combine {to_sexpr(c.phi0)} (squares {inner}))" if inner else \
        f"(combine {to_sexpr(c.phi0)} (squares))"


def from_sexpr(text: str) -> Certificate:
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    pos = 0

    def parse():
        nonlocal pos
        if tokens[pos] != "(":
            raise ValueError(f"expected '(' at token {pos}")
        head = tokens[pos + 1]
        pos += 2
        if head == "leaf":
            vals = []
            while tokens[pos] != ")":
                vals.append(float(tokens[pos]))
                pos += 1
            pos += 1
            return Leaf(tuple(vals))
        if head == "combine":
            phi0 = parse()
            if tokens[pos] != "(" or tokens[pos + 1] != "squares":
                raise ValueError("combine node needs a (squares ...) list")
            pos += 2
            squares = []
            while tokens[pos] != ")":
                squares.append(parse())
            pos += 2  # close squares and combine
            return Combine(phi0, tuple(squares))
        raise ValueError(f"unknown node {head!r}")

    cert = parse()
    if pos != len(tokens):
        raise ValueError("trailing tokens after certificate")
    return cert


# --- synthesis parameters ------------------------------------------------------

@dataclass(frozen=True)
class SynthesisParams:
    """Finite choices standing in for the tau -> 0 limits.

    tau            conjugation time of each square block
    tau_leaf       duration of a B-pulse; None uses the shortest pulse the cap allows
    tau_bracket    middle time of the bracket realization of exp(dF)
    tau_dilation   tau of the dilation limit that realizes exp(aB*)
    dilation       'rotation' or 'bracket': how exp(dF) is realized inside exp(aB*)
    pulse_correction  shorten the drifts of a leaf square to absorb the extra square
                   that finite-length pulses add
    """

    tau: float = 1e-4
    tau_leaf: float | None = None
    cap: float = AMPLITUDE_CAP
    pulse_fill: float = 0.5
    merge_pulses: bool = True
    tau_bracket: float = 1e-2
    tau_dilation: float = 0.1
    dilation: str = "rotation"
    rotation_fill: float = 0.8
    pulse_correction: bool = True

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.tau_leaf is not None and not self.tau_leaf > 0:
            raise ValueError("tau_leaf must be positive")
        if self.dilation not in ("rotation", "bracket"):
            raise ValueError(f"unknown dilation {self.dilation!r}")

    def with_(self, **kw) -> SynthesisParams:
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


# --- lowering ---------------------------------------------------------------

def _pulse_time(amp: float, params: SynthesisParams) -> float:
    if params.tau_leaf is None:
        return amp / (params.pulse_fill * params.cap)
    return params.tau_leaf


def _square_ops(psi: Certificate, params: SynthesisParams) -> list:
    zero = (0.0,) * (2 * psi.dim + 1)
    tau = params.tau
    g = 1.0 / math.sqrt(tau)
    up = _ops(scale_certificate(psi, g), params)
    down = _ops(scale_certificate(psi, -g), params)
    # a finite pulse of amplitude g adds about (1/3) t_leaf g^2 psi^2 to the square,
    # so the drift is shortened by 2/3 of the pulse time (leaf squares only)
    drift = tau
    if params.pulse_correction and isinstance(psi, Leaf):
        amp = g * float(np.max(np.abs(psi.alpha)))
        shift = 2.0 / 3.0 * _pulse_time(amp, params)
        if shift < tau:
            drift = tau - shift
    return up + [("seg", drift, zero)] + down


def _ops(c: Certificate, params: SynthesisParams) -> list:
    if isinstance(c, Leaf):
        return [("pulse", np.asarray(c.alpha, dtype=float))]
    out = _ops(c.phi0, params)
    for s in c.squares:
        out += _square_ops(s, params)
    return out


def _lower(ops: list, dim: int, params: SynthesisParams) -> Schedule:
    merged: list = []
    for op in ops:
        if (params.merge_pulses and op[0] == "pulse" and merged and merged[-1][0] == "pulse"):
            merged[-1] = ("pulse", merged[-1][1] + op[1])
        else:
            merged.append(op)
    segments = []
    for op in merged:
        if op[0] == "seg":
            segments.append(Segment(op[1], op[2]))
            continue
        alpha = op[1]
        amp = float(np.max(np.abs(alpha)))
        if amp == 0.0:
            continue
        t = _pulse_time(amp, params)
        if params.tau_leaf is not None:
            if amp / t > params.cap:
                raise CapViolation(
                    f"leaf {tuple(np.round(alpha, 6))} needs amplitude {amp / t:.3e} > cap "
                    f"{params.cap:.1e}; minimal feasible pulse time {amp / params.cap:.3e}")
        segments.append(Segment(t, tuple(alpha / t)))
    return Schedule(dim, tuple(segments))


def compile_expB(cert: Certificate, params: SynthesisParams = SynthesisParams()) -> Schedule:
    """Schedule approximating exp(phi B) for the certified phi."""
    return _lower(_ops(cert, params), cert.dim, params)


def required_resolution(phi: TrigPoly) -> int:
    """Smallest N at which the pointwise products inside a synthesis of phi stay unaliased."""
    return 4 * phi.max_frequency


def compile_poly(phi: TrigPoly, params: SynthesisParams = SynthesisParams()) -> Schedule:
    return compile_expB(hierarchy_decompose(phi), params)


def _v_mean(V) -> float:
    if V is None:
        return 0.0
    return (V.V if isinstance(V, BackgroundPotential) else V).mean()


def compile_expF(delta: float, params: SynthesisParams = SynthesisParams(), dim: int = 1,
                 method: str = "bracket", V=None) -> Schedule:
    """Schedule approximating exp(-delta F) = diag(e^delta, e^-delta).

    'bracket': pulse delta/tau, drift of A + (delta/tau)^2 B for tau, pulse -delta/tau.
    'rotation': quarter periods of the strongly confined oscillation w'' = -Omega^2 w
    map (w, w') to (w'/Omega, -Omega w); pairing two frequencies gives a diagonal
    squeeze Omega_1/Omega_2 that is exact on the constant mode.
    """
    zero = (0.0,) * (2 * dim + 1)
    if delta == 0:
        return Schedule.empty(dim)
    if method == "bracket":
        tau = params.tau_bracket
        u0 = delta**2 / tau**2
        if u0 > params.cap:
            raise CapViolation(f"bracket drift amplitude {u0:.3e} exceeds cap; "
                               f"minimal feasible tau {abs(delta) / math.sqrt(params.cap):.3e}")
        e0 = np.zeros(2 * dim + 1)
        e0[0] = 1.0
        mid = list(zero)
        mid[0] = u0
        if params.pulse_correction:
            # same finite-pulse excess as for squares, cancelled by a slightly deeper well
            mid[0] = u0 * (1.0 + 2.0 / 3.0 * _pulse_time(abs(delta) / tau, params) / tau)
        ops = [("pulse", delta / tau * e0), ("seg", tau, tuple(mid)), ("pulse", -delta / tau * e0)]
        return _lower(ops, dim, params.with_(merge_pulses=False))
    if method == "rotation":
        vbar = _v_mean(V)
        k = max(1, math.ceil(abs(delta) / 2))
        ratio = math.exp(delta / (2 * k))  # Omega_1 / Omega_2
        top = math.sqrt(params.rotation_fill * params.cap)
        o1, o2 = (top * ratio, top) if ratio < 1 else (top, top / ratio)
        segs = []
        for _ in range(2 * k):
            for om in (o1, o2):
                u = list(zero)
                u[0] = 1.0 - om**2 - vbar
                segs.append(Segment(math.pi / (2 * om), tuple(u)))
        return Schedule(dim, tuple(segs))
    raise ValueError(f"unknown method {method!r}")


def compile_expBstar(a: float, params: SynthesisParams = SynthesisParams(), dim: int = 1,
                     V=None) -> Schedule:
    """Schedule approximating exp(aB*) : (w, w') -> (w + a w', w').

    Conjugates a drift of duration a tau^2 by the dilations diag(tau, 1/tau) and its
    inverse.  exp(-delta F) is what compile_expF(delta) realizes, so the dilation
    applied first, diag(tau, 1/tau), comes from compile_expF(log tau).
    """
    if a < 0:
        raise ValueError("exp(aB*) is only reachable for a >= 0")
    if a == 0:
        return Schedule.empty(dim)
    tau = params.tau_dilation
    lt = math.log(tau)
    zero = (0.0,) * (2 * dim + 1)
    first = compile_expF(lt, params, dim, params.dilation, V)
    last = compile_expF(-lt, params, dim, params.dilation, V)
    return first + Schedule.single(dim, a * tau * tau, zero) + last


TAU_LADDER = (1e-2, 1e-3, 1e-4, 1e-5)


@dataclass
class TauChoice:
    tau: float
    schedule: Schedule
    error: float
    tried: list  # (tau, error, total time); None marks an infeasible rung


def select_tau(compile_at, W0, exact, ladder=TAU_LADDER, budget: float = math.inf,
               V: BackgroundPotential | None = None, dt: float | None = None) -> TauChoice:
    """Simulate compile_at(tau) for each tau and keep the most accurate schedule.

    Schedules longer than budget or refused by the cap are skipped.
    """
    best, tried = None, []
    for tau in ladder:
        try:
            sched = compile_at(float(tau))
        except CapViolation:
            tried.append((float(tau), None, None))
            continue
        if sched.total_time > budget:
            tried.append((float(tau), None, sched.total_time))
            continue
        final = simulate(W0, sched, V, dt, keep=False).final if len(sched) else W0
        err = energy_norm(final - exact)
        tried.append((float(tau), err, sched.total_time))
        if best is None or err < best.error:
            best = TauChoice(float(tau), sched, err, tried)
    if best is None:
        raise CapViolation("no tau on the ladder gives a feasible schedule within the budget")
    best.tried = tried
    return best
