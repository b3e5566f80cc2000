"""Global numerical tolerance bundle.

``CHEMFLOOD_TOL`` may hold a JSON object whose keys override fields of
`Tolerances`, e.g. ``CHEMFLOOD_TOL='{"ode_rtol": 1e-9}'``.
"""

import json
import os
from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    fd_step: float = 1e-6
    root_xtol: float = 1e-14
    root_grid: int = 2048
    saddle_node: float = 1e-8
    portrait_type: float = 1e-9
    validation_margin: float = 1e-12
    ode_rtol: float = 1e-11
    ode_atol: float = 1e-13
    launch_offset: float = 1e-7
    boundary_layer: float = 1e-6
    offset_check: float = 1e-8
    kappa_rtol: float = 1e-10
    v_rtol: float = 1e-10
    kappa_min: float = 1e-12
    kappa_max: float = 1e12
    explicit_max_steps: int = 40000
    integral_check: float = 1e-6


DEFAULT = Tolerances()


def from_env(base=DEFAULT):
    raw = os.environ.get("CHEMFLOOD_TOL")
    if not raw:
        return base
    try:
        overrides = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"CHEMFLOOD_TOL is not valid JSON: {exc}") from None
    if not isinstance(overrides, dict):
        raise ValueError("CHEMFLOOD_TOL must be a JSON object")
    known = {f.name: f.type for f in fields(Tolerances)}
    unknown = set(overrides) - set(known)
    if unknown:
        raise ValueError(f"unknown tolerance keys: {sorted(unknown)}")
    cast = {k: (int(v) if isinstance(getattr(base, k), int) else float(v)) for k, v in overrides.items()}
    return replace(base, **cast)


def get():
    return from_env()
