"""Planners that chain STAR building blocks into one flat schedule per reachability claim.

Every planner runs closed loop: each stage is compiled, simulated from the state
the previous stage actually produced, and logged with its mismatch against the
intermediate target of the transition diagram.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

from .grid import State, TorusField, TorusGrid, energy_norm, norm_hs
from .propagators import BackgroundPotential, Schedule, free_propagate, run
from .saturation import (SynthesisParams, compile_expB, compile_expBstar, hierarchy_decompose,
                         required_resolution)
from .trigpoly import TrigPoly, canonical
from .zero_sets import (DEFAULT_ETA, inscribed_radius, state_zero_mask, vanishing_profile,
                        zero_mask, zero_measure)

LAMBDA_LADDER = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
MASSLESS = 1.0  # u_0 = 1 cancels the mass term


class PlanRejected(ValueError):
    """The planner does not apply to this input (dimension, sign hypotheses)."""


@dataclass(frozen=True)
class Stage:
    name: str
    target: str
    error: float


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float


@dataclass(frozen=True)
class PlanReport:
    schedule: Schedule
    achieved_error: float
    total_time: float
    stages: tuple[Stage, ...] = ()
    checks: tuple[Check, ...] = ()
    flags: tuple[str, ...] = ()
    final: State | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isclose(self.total_time, self.schedule.total_time, rel_tol=1e-12, abs_tol=1e-15):
            raise ValueError("total_time must equal the schedule's total time")

    @property
    def ok(self) -> bool:
        return not self.flags and all(c.passed for c in self.checks)

    def failed_checks(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]


@dataclass(frozen=True)
class PlannerParams:
    """Knobs shared by all planners.

    degree      largest |n|_1 of a synthesized multiplier; 2 keeps certificates at
                level 1, deeper squares do not fit under the amplitude cap
    projection  'lstsq' (best multiplier in the synthesizable span), 'dirichlet' or
                'fejer' (truncations of the regularized quotient)
    bstar_a     amount of exp(aB*) in the three-arrow plan; None scans for the value
                with the smallest predicted error
    """

    synthesis: SynthesisParams = SynthesisParams()
    eta: float = DEFAULT_ETA
    lambdas: tuple[float, ...] = LAMBDA_LADDER
    degree: int = 2
    projection: str = "lstsq"
    bstar_a: float | None = 1.0
    time_budget: float = 0.5
    dt: float | None = None

    def __post_init__(self):
        if self.projection not in ("lstsq", "dirichlet", "fejer"):
            raise ValueError(f"unknown projection {self.projection!r}")
        if self.degree < 0:
            raise ValueError("degree must be nonnegative")

    def with_(self, **kw) -> PlannerParams:
        return replace(self, **kw)

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "synthesis"}
        out["lambdas"] = list(self.lambdas)
        out["synthesis"] = self.synthesis.as_dict()
        return out


# --- helpers -------------------------------------------------------------------

def _frequencies(dim: int, degree: int) -> list[tuple[int, ...]]:
    """Canonical nonzero n with |n|_1 <= degree."""
    out = set()
    for n in product(range(-degree, degree + 1), repeat=dim):
        if any(n) and sum(map(abs, n)) <= degree:
            out.add(canonical(n)[0])
    return sorted(out, key=lambda n: (sum(map(abs, n)), n))


def _basis(dim: int, degree: int) -> list[TrigPoly]:
    polys = [TrigPoly.constant(dim, 1.0)]
    for n in _frequencies(dim, degree):
        polys += [TrigPoly.cos(n), TrigPoly.sin(n)]
    return polys


def _weighted_coeffs(f: np.ndarray, grid: TorusGrid, s: float) -> np.ndarray:
    c = np.fft.fftn(f) / grid.size
    if s:
        c = c * (1.0 + grid.k2) ** (s / 2)
    c = c.ravel() * math.sqrt(grid.volume)
    return np.concatenate([c.real, c.imag])


def best_multiplier(w: TorusField, g: TorusField, degree: int, s: float = 0.0) -> TrigPoly:
    """phi of |n|_1 <= degree minimizing ||g - phi w||_{H^s}."""
    grid = w.grid
    polys = _basis(grid.dim, degree)
    cols = [_weighted_coeffs(p.values(grid) * w.physical, grid, s) for p in polys]
    coef, *_ = np.linalg.lstsq(np.array(cols).T, _weighted_coeffs(g.physical, grid, s), rcond=None)
    out = TrigPoly.zero(grid.dim)
    for c, p in zip(coef, polys):
        out = out + p.scale(float(c))
    return out.pruned(1e-13)


def _project(quotient: TorusField, w: TorusField, g: TorusField, params: PlannerParams,
             s: float) -> TrigPoly:
    if params.projection == "lstsq":
        return best_multiplier(w, g, params.degree, s)
    p = TrigPoly.from_field(quotient, params.degree, kernel=params.projection)
    keep = {n: ab for n, ab in p.terms.items() if sum(map(abs, n)) <= params.degree}
    return TrigPoly(p.dim, p.const, keep).pruned(1e-13)


def _relative(err: float, ref: State) -> float:
    scale = energy_norm(ref)
    return err / scale if scale > 0 else err


def _is_zero(f: TorusField) -> bool:
    return f.max_abs() == 0.0


def _simulate(W: State, sched: Schedule, V, params: PlannerParams) -> State:
    if len(sched) == 0:
        return W
    return run(W, sched, V, params.dt)


def _free_segment(dim: int, duration: float) -> Schedule:
    u = [0.0] * (2 * dim + 1)
    u[0] = MASSLESS
    return Schedule.single(dim, duration, u)


# --- velocity control ------------------------------------------------------------

def plan_velocity(W0: State, vf: TorusField, eps: float, params: PlannerParams = PlannerParams(),
                  V: BackgroundPotential | None = None, sobolev: float = 0.0) -> PlanReport:
    """Steer (w0, v0) to (w0, vf) with a single exp(phi B).

    sobolev=1 fits phi in H^1 instead of L^2, for stages whose velocity residual
    is later turned into profile by exp(aB*).
    """
    w0, v0 = W0.profile, W0.velocity
    grid = W0.grid
    g = vf - v0
    target = State(w0, vf)
    checks = []
    flags = []

    zw = zero_mask(w0, params.eta)
    zg = zero_mask(g, params.eta)
    if _is_zero(g):
        zg_ok, missing = True, 0.0
    else:
        uncovered = zw.mask & ~zg.mask
        zg_ok = not uncovered.any()
        missing = float(np.count_nonzero(uncovered) * grid.cell_volume)
    checks.append(Check("velocity change vanishes on Z(w0)", zg_ok, missing))
    if not zg_ok:
        flags.append("hypothesis: velocity change does not vanish on Z(w0)")

    if _is_zero(g):
        return PlanReport(Schedule.empty(grid.dim), 0.0, 0.0, (Stage("identity", "v0 = vf", 0.0),),
                          tuple(checks), tuple(flags), W0, {"phi": "0"})

    top = float(np.max(w0.physical**2))
    quotient, lam_used, residual = None, None, math.inf
    for lam in params.lambdas:
        q = TorusField(grid, w0.physical * g.physical / (w0.physical**2 + lam * top)) \
            if top > 0 else TorusField.zeros(grid)
        residual = norm_hs(g - q * w0, 0.0)
        quotient, lam_used = q, lam
        if residual < eps / 2:
            break
    reachable = residual < eps / 2
    checks.append(Check("regularized residual < eps/2", reachable, residual))
    if not reachable:
        flags.append("unreachable: regularized residual exceeds eps/2 for every lambda")
    stages = [Stage("division", f"lambda = {lam_used:g} * max w0^2", residual)]

    phi = _project(quotient, w0, g, params, sobolev)
    if grid.n < required_resolution(phi):
        raise PlanRejected(f"N = {grid.n} is below the {required_resolution(phi)} points "
                           f"needed to synthesize degree {params.degree} without aliasing")
    proj_res = norm_hs(g - phi.to_field(grid) * w0, sobolev)
    stages.append(Stage("projection", f"{params.projection}, |n|_1 <= {params.degree}", proj_res))

    sched = compile_expB(hierarchy_decompose(phi), params.synthesis) if phi.max_coeff() > 0 \
        else Schedule.empty(grid.dim)
    final = _simulate(W0, sched, V, params)
    err = energy_norm(final - target)
    stages.append(Stage("synthesis", "(w0, vf)", err))
    return PlanReport(sched, err, sched.total_time, tuple(stages), tuple(checks), tuple(flags),
                      final, {"phi": repr(phi), "lambda": lam_used})


# --- a-selection -------------------------------------------------------------------

def select_a(W0: State, eta: float = DEFAULT_ETA, n_scan: int = 64) -> float:
    """a > 0 for which w0 + a v0 has a zero set as small as Z(W0)."""
    w0, v0 = W0.profile, W0.velocity
    if _is_zero(w0) and _is_zero(v0):
        raise ValueError("select_a needs a nonzero state")
    if _is_zero(v0):
        return 1.0
    nw, nv = norm_hs(w0), norm_hs(v0)
    upper = 2.0 * nw / (nv + 1e-300) if nw > 0 else 2.0
    base = zero_measure(state_zero_mask(W0, eta))
    best_a, best = None, math.inf
    for k in range(1, n_scan + 1):
        a = upper * k / n_scan
        gap = zero_measure(zero_mask(w0 + a * v0, eta)) - base
        if gap < best - 1e-15:
            best_a, best = a, gap
    return best_a


# --- three-arrow plan ------------------------------------------------------------

def _predict_stac(W0: State, Wf: State, a: float, degree: int) -> float:
    """Error of the three-arrow plan with exact exp(phi B) and exp(aB*)."""
    w0, v0 = W0.profile, W0.velocity
    g1 = (Wf.profile - w0) * (1.0 / a) - v0
    phi1 = best_multiplier(w0, g1, degree, 1.0).to_field(w0.grid)
    v1 = v0 + phi1 * w0
    w1 = w0 + a * v1
    phi2 = best_multiplier(w1, Wf.velocity - v1, degree, 0.0).to_field(w0.grid)
    return energy_norm(State(w1, v1 + phi2 * w1) - Wf)


def choose_bstar_amount(W0: State, Wf: State, degree: int = 2,
                        candidates=tuple(np.geomspace(0.25, 4.0, 17))) -> float:
    errs = [_predict_stac(W0, Wf, float(a), degree) for a in candidates]
    return float(candidates[int(np.argmin(errs))])


def plan_stac(W0: State, Wf: State, eps: float, params: PlannerParams = PlannerParams(),
              V: BackgroundPotential | None = None) -> PlanReport:
    """(w0, v0) -> (w0, (wf - w0)/a) -> (wf, (wf - w0)/a) -> (wf, vf)."""
    grid = W0.grid
    if energy_norm(W0 - Wf) == 0.0:
        return PlanReport(Schedule.empty(grid.dim), 0.0, 0.0, (Stage("identity", "W0 = Wf", 0.0),),
                          (), (), W0)
    checks, flags, stages = [], [], []
    sched = Schedule.empty(grid.dim)
    W = W0

    z_profile = zero_measure(zero_mask(W.profile, params.eta))
    checks.append(Check("|Z(w0)| = 0", z_profile == 0.0, z_profile))
    if z_profile > 0:
        z_state = zero_measure(state_zero_mask(W, params.eta))
        checks.append(Check("|Z(W0)| = 0", z_state == 0.0, z_state))
        if z_state > 0:
            flags.append("hypothesis: |Z(W0)| > 0, the profile cannot be steered everywhere")
        a0 = select_a(W, params.eta)
        pre = compile_expBstar(a0, params.synthesis, grid.dim, V)
        ideal = State(W.profile + a0 * W.velocity, W.velocity)
        W = _simulate(W, pre, V, params)
        sched = sched + pre
        stages.append(Stage("select_a", f"exp({a0:.4g} B*)", energy_norm(W - ideal)))

    a = params.bstar_a if params.bstar_a is not None else choose_bstar_amount(W, Wf, params.degree)
    third = eps / 3

    v_mid = (Wf.profile - W.profile) * (1.0 / a)
    rep = plan_velocity(W, v_mid, third, params, V, sobolev=1.0)
    stages += [replace(s, name="velocity 1: " + s.name) for s in rep.stages]
    checks += [replace(c, name="velocity 1: " + c.name) for c in rep.checks]
    flags += ["velocity 1: " + f for f in rep.flags]
    W = rep.final
    sched = sched + rep.schedule

    shear = compile_expBstar(a, params.synthesis, grid.dim, V)
    W = _simulate(W, shear, V, params)
    sched = sched + shear
    stages.append(Stage("shear", f"exp({a:.4g} B*) -> (wf, (wf - w0)/a)",
                        energy_norm(W - State(Wf.profile, v_mid))))

    rep = plan_velocity(W, Wf.velocity, third, params, V)
    stages += [replace(s, name="velocity 2: " + s.name) for s in rep.stages]
    checks += [replace(c, name="velocity 2: " + c.name) for c in rep.checks]
    flags += ["velocity 2: " + f for f in rep.flags]
    W = rep.final
    sched = sched + rep.schedule

    err = energy_norm(W - Wf)
    stages.append(Stage("final", "Wf", err))
    stage_sum = sum(s.error for s in stages if s.name in ("shear", "select_a")
                    or s.name.endswith("synthesis"))
    checks.append(Check("error within stage budget", err <= stage_sum + 1e-15, err))
    checks.append(Check("total time within small-time budget", sched.total_time <= params.time_budget,
                        sched.total_time))
    return PlanReport(sched, err, sched.total_time, tuple(stages), tuple(checks), tuple(flags), W,
                      {"bstar_a": a})


# --- (0, phi) and the time-optimal plans ----------------------------------------

def plan_reach_zero_phi(W0: State, phi: TorusField, eps: float,
                        params: PlannerParams = PlannerParams(),
                        V: BackgroundPotential | None = None) -> PlanReport:
    """W0 -> (w0, -phi - w0) -> (-phi, -phi - w0) -> (-phi, phi) -> (0, phi)."""
    grid = W0.grid
    checks, flags, stages = [], [], []
    zw = zero_mask(W0.profile, params.eta)
    zW = state_zero_mask(W0, params.eta)
    zp = zero_mask(phi, params.eta)
    same = bool(np.array_equal(zw.mask, zW.mask) and np.array_equal(zW.mask, zp.mask))
    mismatch = float(np.count_nonzero(zw.mask ^ zW.mask) + np.count_nonzero(zW.mask ^ zp.mask))
    sched = Schedule.empty(grid.dim)
    W = W0

    if _is_zero(W0.profile):
        if energy_norm(W0 - State(W0.profile, phi)) == 0.0:
            return PlanReport(sched, 0.0, 0.0, (Stage("identity", "W0 = (0, phi)", 0.0),), (), (), W0)
        # open the profile first so the velocity stages have something to act on
        pre = compile_expBstar(1.0, params.synthesis, grid.dim, V)
        W = _simulate(W, pre, V, params)
        sched = sched + pre
        stages.append(Stage("open profile", "exp(B*)",
                            energy_norm(W - State(W0.velocity, W0.velocity))))
        zw = zero_mask(W.profile, params.eta)
        same = bool(np.array_equal(zw.mask, zp.mask))
        mismatch = float(np.count_nonzero(zw.mask ^ zp.mask))
    checks.append(Check("Z(w0) = Z(W0) = Z(phi)", same, mismatch))
    if not same:
        flags.append("hypothesis: Z(w0), Z(W0) and Z(phi) differ")

    quarter = eps / 4
    w0 = W.profile
    for label, vel, then in (("velocity 1", -phi - w0, State(-phi, -phi - w0)),
                             ("velocity 2", phi, State(TorusField.zeros(grid), phi))):
        rep = plan_velocity(W, vel, quarter, params, V, sobolev=1.0 if label == "velocity 1" else 0.0)
        stages += [replace(s, name=f"{label}: {s.name}") for s in rep.stages]
        checks += [replace(c, name=f"{label}: {c.name}") for c in rep.checks]
        flags += [f"{label}: {f}" for f in rep.flags]
        sched = sched + rep.schedule
        shear = compile_expBstar(1.0, params.synthesis, grid.dim, V)
        W = _simulate(rep.final, shear, V, params)
        sched = sched + shear
        stages.append(Stage(f"{label} shear", "exp(B*)", energy_norm(W - then)))

    target = State(TorusField.zeros(grid), phi)
    err = energy_norm(W - target)
    stages.append(Stage("final", "(0, phi)", err))
    return PlanReport(sched, err, sched.total_time, tuple(stages), tuple(checks), tuple(flags), W)


def positivity_time(v0: TorusField, step: float = 0.05, t_max: float = 20.0,
                    eta: float = DEFAULT_ETA) -> tuple[float, dict]:
    """First t on the scan grid where the massless free profile from (0, v0) is > 0."""
    if _is_zero(v0):
        raise ValueError("velocity must be nonzero")
    if v0.physical.min() < -eta * v0.max_abs():
        raise ValueError("velocity must be nonnegative up to eta")
    grid = v0.grid
    W0 = State(TorusField.zeros(grid), v0)
    info = {"inscribed_radius": inscribed_radius(zero_mask(v0, eta))}
    info.update(large_time_bound(v0))
    for k in range(1, int(round(t_max / step)) + 1):
        t = round(k * step, 12)  # keep scan times free of accumulation noise
        if free_propagate(W0, t, massive=False).profile.physical.min() > 0:
            info["flag"] = None
            return t, info
    info["flag"] = f"profile never positive for t <= {t_max}"
    return math.inf, info


def large_time_bound(v0: TorusField) -> dict:
    """M = sum_{n != 0} |c_n| / |n| and T1 = M / c_0."""
    c = v0.spectral
    k = np.sqrt(v0.grid.k2)
    nz = k > 0
    M = float(np.sum(np.abs(c[nz]) / k[nz]))
    c0 = float(c.flat[0].real)
    T1 = M / c0 if c0 > 0 else math.inf
    return {"M": M, "c0": c0, "T1": T1}


def plan_min_time(W0: State, Wf: State, eps: float, params: PlannerParams = PlannerParams(),
                  V: BackgroundPotential | None = None, margin: float | None = None) -> PlanReport:
    """Reach Wf in time close to r(W0): free massless wait, then the three-arrow plan.

    `margin` is the time allowance on top of r(W0) (defaults to eps); the free
    segment lasts r + margin/2.
    """
    grid = W0.grid
    if grid.dim not in (1, 2):
        raise PlanRejected(f"minimal-time planning needs d in (1, 2), got d = {grid.dim}; "
                           "use plan_large_time")
    if V is not None and V.V.max_abs() > 0:
        raise PlanRejected("minimal-time planning assumes V = 0")
    margin = eps if margin is None else margin
    r = inscribed_radius(state_zero_mask(W0, params.eta))
    checks, flags, stages = [], [], []
    sched = Schedule.empty(grid.dim)
    W = W0

    if r == 0.0:
        tail = plan_stac(W, Wf, eps, params)
        return replace(tail, info={**tail.info, "r": 0.0, "bullet": "|Z(w0)| = 0"})

    w0, v0 = W.profile, W.velocity
    tol = params.eta * max(v0.max_abs(), 1e-300)
    if _is_zero(w0) and (v0.physical.min() >= -tol or v0.physical.max() <= tol):
        bullet = "zero profile, sign-definite velocity"
    else:
        if not np.array_equal(zero_mask(w0, params.eta).mask, state_zero_mask(W, params.eta).mask):
            bullet = "a-selection, then (0, -|w|)"
            a0 = select_a(W, params.eta)
            pre = compile_expBstar(a0, params.synthesis, grid.dim)
            W = _simulate(W, pre, None, params)
            sched = sched + pre
            stages.append(Stage("select_a", f"exp({a0:.4g} B*)", 0.0))
        else:
            bullet = "(0, -|w0|)"
        rep = plan_reach_zero_phi(W, -abs(W.profile), eps / 2, params)
        stages += [replace(s, name="prepare: " + s.name) for s in rep.stages]
        checks += [replace(c, name="prepare: " + c.name) for c in rep.checks]
        flags += ["prepare: " + f for f in rep.flags]
        W = rep.final
        sched = sched + rep.schedule

    wait = r + margin / 2
    free = _free_segment(grid.dim, wait)
    W = _simulate(W, free, None, params)
    sched = sched + free
    w = W.profile.physical
    sign_ok = bool(w.min() > 0 or w.max() < 0)
    checks.append(Check("profile sign-definite after free segment", sign_ok,
                        float(np.min(np.abs(w)))))
    if not sign_ok:
        flags.append("positivity: profile still vanishes after the free segment")
    stages.append(Stage("free", f"massless drift for r + margin/2 = {wait:.4g}",
                        float(np.min(np.abs(w)))))

    tail = plan_stac(W, Wf, eps, params)
    stages += [replace(s, name="tail: " + s.name) for s in tail.stages]
    checks += [replace(c, name="tail: " + c.name) for c in tail.checks
               if not c.name.startswith("total time")]
    flags += ["tail: " + f for f in tail.flags]
    sched = sched + tail.schedule
    W = tail.final
    err = energy_norm(W - Wf)
    checks.append(Check("total time <= r + margin", sched.total_time <= r + margin, sched.total_time))
    return PlanReport(sched, err, sched.total_time, tuple(stages), tuple(checks), tuple(flags), W,
                      {"r": r, "bullet": bullet, **tail.info})


def plan_large_time(W0: State, Wf: State, eps: float, params: PlannerParams = PlannerParams(),
                    V: BackgroundPotential | None = None, phi: TorusField | str = "vanishing",
                    margin: float = 0.1) -> PlanReport:
    """W0 -> (0, phi) -> massless wait past T1 -> three-arrow plan to Wf.

    phi is a field with positive mean, or a recipe built from W0:
      'vanishing'  smooth profile equal to 0 exactly on the common zeros of W0
      'abs'        |w0| after one Fejer pass
    """
    grid = W0.grid
    if isinstance(phi, str):
        if phi == "vanishing":
            mask = state_zero_mask(W0, params.eta)
            if mask.full:
                raise PlanRejected("W0 vanishes identically; no profile to prepare from")
            phi = vanishing_profile(mask)
        elif phi == "abs":
            phi = TrigPoly.from_field(abs(W0.profile), grid.n // 2 - 1, kernel="fejer").to_field(grid)
        else:
            raise ValueError(f"unknown phi recipe {phi!r}")
    bound = large_time_bound(phi)
    if not bound["c0"] > 0:
        raise PlanRejected("the prepared velocity must have positive mean")
    stages, checks, flags = [], [], []

    rep = plan_reach_zero_phi(W0, phi, eps / 2, params, V)
    stages += [replace(s, name="prepare: " + s.name) for s in rep.stages]
    checks += [replace(c, name="prepare: " + c.name) for c in rep.checks]
    flags += ["prepare: " + f for f in rep.flags]
    sched = rep.schedule
    W = rep.final

    wait = bound["T1"] + margin
    free = _free_segment(grid.dim, wait)
    W = _simulate(W, free, V, params)
    sched = sched + free
    positive = bool(W.profile.physical.min() > 0)
    checks.append(Check("profile positive after T1", positive, float(W.profile.physical.min())))
    stages.append(Stage("free", f"massless drift for T1 + margin = {wait:.4g}",
                        float(W.profile.physical.min())))

    tail = plan_stac(W, Wf, eps, params, V)
    stages += [replace(s, name="tail: " + s.name) for s in tail.stages]
    checks += [replace(c, name="tail: " + c.name) for c in tail.checks
               if not c.name.startswith("total time")]
    flags += ["tail: " + f for f in tail.flags]
    sched = sched + tail.schedule
    W = tail.final
    err = energy_norm(W - Wf)
    return PlanReport(sched, err, sched.total_time, tuple(stages), tuple(checks), tuple(flags), W,
                      {**bound, **tail.info})
