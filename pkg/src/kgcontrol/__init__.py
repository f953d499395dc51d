"""Bilinear control of the Klein-Gordon equation on the flat torus, by simulation."""

from .grid import State, TorusField, TorusGrid, energy_norm, norm_hs, norm_lp
from .propagators import (AMPLITUDE_CAP, BackgroundPotential, CapViolation, Schedule, Segment,
                          evolve_segment, exp_B, exp_Bstar, exp_F, free_propagate, run, simulate)
from .saturation import (Combine, Leaf, SynthesisParams, compile_expB, compile_expBstar,
                         compile_expF, compile_poly, hierarchy_decompose)
from .strategy import (PlannerParams, PlanRejected, PlanReport, plan_large_time, plan_min_time,
                       plan_reach_zero_phi, plan_stac, plan_velocity, positivity_time, select_a)
from .trigpoly import TrigPoly
from .zero_sets import inscribed_radius, state_zero_mask, zero_mask, zero_measure

__version__ = "0.1.0"
