"""Vanishing-viscosity Riemann solutions for a two-component chemical flooding model."""

from chemflood.models import (
    ModelSet,
    boomerang_model,
    chord_coefficients,
    load_model,
    validate_assumptions,
)
from chemflood.twave import SystemKind, classify_portrait, velocity_window
from chemflood.connect import find_kappa_for_v, find_v_for_kappa, sweep_curve
from chemflood.riemann import sample_profile, solve_lax_baseline, solve_riemann

__version__ = "0.1.0"

__all__ = [
    "ModelSet",
    "SystemKind",
    "boomerang_model",
    "chord_coefficients",
    "classify_portrait",
    "find_kappa_for_v",
    "find_v_for_kappa",
    "load_model",
    "sample_profile",
    "solve_lax_baseline",
    "solve_riemann",
    "sweep_curve",
    "validate_assumptions",
    "velocity_window",
]
