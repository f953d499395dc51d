"""Minimal-time plan from a zero profile whose velocity vanishes on an arc.

Prints the stage log, the inscribed radius and the planned total time, and the
profile minimum along the massless free segment.
"""

import argparse

import numpy as np

from kgcontrol.fields import ramp_profile, random_field
from kgcontrol.grid import State, TorusField, TorusGrid, energy_norm
from kgcontrol.propagators import free_propagate
from kgcontrol.strategy import PlannerParams, plan_min_time
from kgcontrol.zero_sets import inscribed_radius, state_zero_mask


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=1024)
    ap.add_argument("--half-arc", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--margin", type=float, default=0.1)
    args = ap.parse_args()

    grid = TorusGrid(1, args.n)
    W0 = State(TorusField.zeros(grid), TorusField(grid, ramp_profile(grid, np.pi, args.half_arc, 0.25)))
    r = inscribed_radius(state_zero_mask(W0))
    for t in np.arange(0.1, r + 0.2, 0.05):
        w = free_propagate(W0, t, massive=False).profile.physical
        print(f"t = {t:.2f}  min profile = {w.min():+.3e}")

    rng = np.random.default_rng(args.seed)
    f1, f2 = random_field(grid, rng, 2), random_field(grid, rng, 2)
    Wf = State(f1 * (0.3 / f1.max_abs()) + 1.0, f2 * (0.3 / f2.max_abs()))
    scale = energy_norm(Wf)
    rep = plan_min_time(W0, Wf, 0.1 * scale, PlannerParams(bstar_a=None), margin=args.margin)
    for s in rep.stages:
        print(f"{s.name:40s} {s.error:.3e}  {s.target}")
    print(f"r = {r:.4f}  total time = {rep.total_time:.4f}  relative error = "
          f"{rep.achieved_error / scale:.2%}")
    for c in rep.checks:
        print(f"[{'ok' if c.passed else 'FAILED'}] {c.name} ({c.value:.3g})")


if __name__ == "__main__":
    main()
