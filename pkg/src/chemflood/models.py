"""Physical model functions: fractional flow, adsorption and capillarity.

Built-in evaluators are plain arithmetic so that they accept Python floats
(fast path used by the shooting solvers) as well as numpy arrays (lattice
validation, plotting).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from chemflood.errors import DegenerateDataError, DomainError, ModelValidationError

Fn2 = Callable[[float, float], float]
Fn1 = Callable[[float], float]

# second differences of f lose ~eps/h**2 to round-off, so they use a wider step
_SECOND_DIFF_STEP = 1e-4


def _central(fun, x, y, h, lo=0.0, hi=1.0):
    """First derivative of ``fun(x, y)`` in ``x`` on [lo, hi].

    Central differences in the interior, second order one-sided differences
    within ``h`` of either end.
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    scalar = x.ndim == 0
    x, y = np.atleast_1d(x), np.atleast_1d(y)
    fwd = x - lo < h
    bwd = hi - x < h
    mid = ~(fwd | bwd)
    out = np.empty_like(x)
    if np.any(mid):
        xm, ym = x[mid], y[mid]
        out[mid] = (fun(xm + h, ym) - fun(xm - h, ym)) / (2 * h)
    if np.any(fwd):
        xf, yf = x[fwd], y[fwd]
        out[fwd] = (-3 * fun(xf, yf) + 4 * fun(xf + h, yf) - fun(xf + 2 * h, yf)) / (2 * h)
    if np.any(bwd):
        xb, yb = x[bwd], y[bwd]
        out[bwd] = (3 * fun(xb, yb) - 4 * fun(xb - h, yb) + fun(xb - 2 * h, yb)) / (2 * h)
    return float(out[0]) if scalar else out


def _second(fun, x, y, h, lo=0.0, hi=1.0):
    xc = np.clip(np.asarray(x, dtype=float), lo + h, hi - h)
    out = (fun(xc + h, y) - 2 * fun(xc, y) + fun(xc - h, y)) / (h * h)
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# fractional flow


@dataclass(frozen=True, eq=False)
class FluxModel:
    """Fractional flow ``f(s, c)`` with optional analytic partials.

    Missing partials fall back to finite differences with step ``h_fd``.
    ``config`` is the JSON-able description used to rebuild the model.
    """

    f: Fn2
    f_s: Optional[Fn2] = None
    f_c: Optional[Fn2] = None
    f_ss: Optional[Fn2] = None
    h_fd: float = 1e-6
    config: dict = field(default_factory=lambda: {"kind": "custom"})

    def __call__(self, s, c):
        return self.f(s, c)

    def ds(self, s, c):
        if self.f_s is not None:
            return self.f_s(s, c)
        return _central(self.f, s, c, self.h_fd)

    def dc(self, s, c):
        if self.f_c is not None:
            return self.f_c(s, c)
        return _central(lambda y, x: self.f(x, y), c, s, self.h_fd)

    def dss(self, s, c):
        if self.f_ss is not None:
            return self.f_ss(s, c)
        if self.f_s is not None:
            return _central(self.f_s, s, c, self.h_fd)
        return _second(self.f, s, c, max(self.h_fd, _SECOND_DIFF_STEP))


def _ratio_flux(nw, no, mu, dmu, config):
    """``f = s**nw / (s**nw + mu(c) (1-s)**no)``."""

    def f(s, c):
        kw = s**nw
        return kw / (kw + mu(c) * (1 - s) ** no)

    def f_s(s, c):
        m = mu(c)
        kw, ko = s**nw, (1 - s) ** no
        dkw, dko = nw * s ** (nw - 1), -no * (1 - s) ** (no - 1)
        d = kw + m * ko
        return m * (dkw * ko - kw * dko) / (d * d)

    def f_ss(s, c):
        m = mu(c)
        kw, ko = s**nw, (1 - s) ** no
        dkw, dko = nw * s ** (nw - 1), -no * (1 - s) ** (no - 1)
        d2kw, d2ko = nw * (nw - 1) * s ** (nw - 2), no * (no - 1) * (1 - s) ** (no - 2)
        d = kw + m * ko
        dd = dkw + m * dko
        n = dkw * ko - kw * dko
        dn = d2kw * ko - kw * d2ko
        return m * (dn * d - 2 * n * dd) / (d * d * d)

    def f_c(s, c):
        kw, ko = s**nw, (1 - s) ** no
        d = kw + mu(c) * ko
        return -kw * ko * dmu(c) / (d * d)

    return FluxModel(f=f, f_s=f_s, f_c=f_c, f_ss=f_ss, config=config)


def boomerang_flux(amplitude=4.0, tilt=0.0, exponent=2.0):
    """Non-monotone flux with mobility ratio ``1 + amplitude c(1-c) + tilt c``.

    With ``tilt = 0`` the curve returns to itself: ``f(s, 1) == f(s, 0)``.
    A non-zero tilt separates the two end curves.
    """

    def mu(c):
        return 1 + amplitude * c * (1 - c) + tilt * c

    def dmu(c):
        return amplitude * (1 - 2 * c) + tilt

    config = {"kind": "boomerang", "amplitude": amplitude, "tilt": tilt, "exponent": exponent}
    return _ratio_flux(exponent, exponent, mu, dmu, config)


def corey_flux(nw=2.0, no=2.0, mu0=1.0, mu1=1.0):
    """Corey-type flux with viscosity ratio linear in ``c`` (monotone in c)."""

    def mu(c):
        return mu0 + mu1 * c

    def dmu(c):
        return mu1 + 0 * c

    config = {"kind": "corey", "nw": nw, "no": no, "mu0": mu0, "mu1": mu1}
    return _ratio_flux(nw, no, mu, dmu, config)


def table_flux(c_nodes, s_nodes, values):
    """Tabulated flux: PCHIP in ``s`` per tabulated ``c``, linear blend in ``c``."""
    c_nodes = np.asarray(c_nodes, dtype=float)
    s_nodes = np.asarray(s_nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape != (c_nodes.size, s_nodes.size):
        raise DomainError(f"table shape {values.shape} != ({c_nodes.size}, {s_nodes.size})")
    if c_nodes.size < 2 or np.any(np.diff(c_nodes) <= 0) or np.any(np.diff(s_nodes) <= 0):
        raise DomainError("table nodes must be strictly increasing with at least two c rows")
    rows = [PchipInterpolator(s_nodes, v) for v in values]
    d1 = [r.derivative(1) for r in rows]
    d2 = [r.derivative(2) for r in rows]

    def blend(funcs, s, c, slope=False):
        s_arr, c_arr = np.broadcast_arrays(np.asarray(s, float), np.asarray(c, float))
        vals = np.stack([fn(s_arr) for fn in funcs])
        i = np.clip(np.searchsorted(c_nodes, c_arr, side="right") - 1, 0, c_nodes.size - 2)
        lo = np.take_along_axis(vals, i[None, ...], 0)[0]
        hi = np.take_along_axis(vals, (i + 1)[None, ...], 0)[0]
        width = c_nodes[i + 1] - c_nodes[i]
        if slope:
            out = (hi - lo) / width
        else:
            w = (c_arr - c_nodes[i]) / width
            out = (1 - w) * lo + w * hi
        return out if out.ndim else float(out)

    config = {
        "kind": "table",
        "c": c_nodes.tolist(),
        "s": s_nodes.tolist(),
        "f": values.tolist(),
    }
    return FluxModel(
        f=lambda s, c: blend(rows, s, c),
        f_s=lambda s, c: blend(d1, s, c),
        f_ss=lambda s, c: blend(d2, s, c),
        f_c=lambda s, c: blend(rows, s, c, slope=True),
        config=config,
    )


# ---------------------------------------------------------------------------
# adsorption and capillarity


@dataclass(frozen=True, eq=False)
class AdsorptionModel:
    a: Fn1
    da: Optional[Fn1] = None
    d2a: Optional[Fn1] = None
    h_fd: float = 1e-6
    config: dict = field(default_factory=lambda: {"kind": "custom"})

    def __call__(self, c):
        return self.a(c)

    def d1(self, c):
        if self.da is not None:
            return self.da(c)
        return _central(lambda x, _: self.a(x), c, 0.0, self.h_fd)

    def d2(self, c):
        if self.d2a is not None:
            return self.d2a(c)
        if self.da is not None:
            return _central(lambda x, _: self.da(x), c, 0.0, self.h_fd)
        return _second(lambda x, _: self.a(x), c, 0.0, max(self.h_fd, _SECOND_DIFF_STEP))


def langmuir_adsorption(amplitude=1.0, b=1.0):
    """``a(c) = amplitude * c / (1 + b c)``; the default is ``c / (1 + c)``."""
    return AdsorptionModel(
        a=lambda c: amplitude * c / (1 + b * c),
        da=lambda c: amplitude / (1 + b * c) ** 2,
        d2a=lambda c: -2 * amplitude * b / (1 + b * c) ** 3,
        config={"kind": "langmuir", "amplitude": amplitude, "b": b},
    )


def linear_adsorption(k=1.0):
    return AdsorptionModel(
        a=lambda c: k * c,
        da=lambda c: k + 0 * c,
        d2a=lambda c: 0 * c,
        config={"kind": "linear", "k": k},
    )


@dataclass(frozen=True, eq=False)
class CapillaryModel:
    A: Fn2
    lo: float
    hi: float
    config: dict = field(default_factory=lambda: {"kind": "custom"})

    def __call__(self, s, c):
        return self.A(s, c)


def constant_capillarity(value=1.0):
    return CapillaryModel(
        A=lambda s, c: value + 0 * s,
        lo=value,
        hi=value,
        config={"kind": "constant", "value": value},
    )


def quadratic_capillarity(base=1.0, amplitude=0.5):
    """``A = base + amplitude s (1 - s)``."""
    lo, hi = sorted((base, base + amplitude / 4))
    return CapillaryModel(
        A=lambda s, c: base + amplitude * s * (1 - s) + 0 * c,
        lo=lo,
        hi=hi,
        config={"kind": "quadratic", "base": base, "amplitude": amplitude},
    )


# ---------------------------------------------------------------------------
# model set and chord


@dataclass(frozen=True)
class ChordCoefficients:
    d1: float
    d2: float

    def line(self, c):
        return self.d1 * c - self.d2


@dataclass(frozen=True, eq=False)
class ModelSet:
    flux: FluxModel
    adsorption: AdsorptionModel
    capillarity: CapillaryModel
    c_minus: float = 1.0
    c_plus: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.c_plus <= 1.0 and 0.0 <= self.c_minus <= 1.0):
            raise DomainError(f"concentrations must lie in [0, 1], got {self.c_plus}, {self.c_minus}")
        if self.c_minus == self.c_plus:
            raise DegenerateDataError("c_minus == c_plus: no c-shock to resolve")
        if self.c_plus > self.c_minus:
            raise DomainError("only c_minus > c_plus (injection of the chemical) is supported")

    @cached_property
    def chord(self) -> ChordCoefficients:
        return chord_coefficients(self)

    @cached_property
    def validation(self):
        return validate_assumptions(self)

    def to_config(self):
        return {
            "flux": self.flux.config,
            "adsorption": self.adsorption.config,
            "capillarity": self.capillarity.config,
            "c_minus": self.c_minus,
            "c_plus": self.c_plus,
        }


def chord_coefficients(model: ModelSet) -> ChordCoefficients:
    """Coefficients of the chord ``d1 c - d2`` of ``a`` between ``c^+`` and ``c^-``."""
    cm, cp = model.c_minus, model.c_plus
    if cm == cp:
        raise DegenerateDataError("c_minus == c_plus")
    am, ap = float(model.adsorption(cm)), float(model.adsorption(cp))
    return ChordCoefficients(d1=(am - ap) / (cm - cp), d2=(cp * am - cm * ap) / (cm - cp))


def boomerang_model(amplitude=4.0, tilt=0.0, c_minus=1.0, c_plus=0.0) -> ModelSet:
    """The default non-monotone model with ``a = c/(1+c)`` and ``A = 1``."""
    return ModelSet(
        flux=boomerang_flux(amplitude, tilt),
        adsorption=langmuir_adsorption(),
        capillarity=constant_capillarity(),
        c_minus=c_minus,
        c_plus=c_plus,
    )


_FLUX_KINDS = {
    "boomerang": lambda p: boomerang_flux(**p),
    "corey": lambda p: corey_flux(**p),
    "table": lambda p: table_flux(p["c"], p["s"], p["f"]),
}
_ADS_KINDS = {
    "langmuir": lambda p: langmuir_adsorption(**p),
    "linear": lambda p: linear_adsorption(**p),
}
_CAP_KINDS = {
    "constant": lambda p: constant_capillarity(**p),
    "quadratic": lambda p: quadratic_capillarity(**p),
}


def _build(section, registry, entry, default):
    entry = dict(entry or default)
    kind = entry.pop("kind", None)
    if kind not in registry:
        raise DomainError(f"unknown {section} kind {kind!r}; expected one of {sorted(registry)}")
    try:
        return registry[kind](entry)
    except (TypeError, KeyError) as exc:
        raise DomainError(f"bad {section} parameters: {exc}") from None


def model_from_config(cfg: dict) -> ModelSet:
    return ModelSet(
        flux=_build("flux", _FLUX_KINDS, cfg.get("flux"), {"kind": "boomerang"}),
        adsorption=_build("adsorption", _ADS_KINDS, cfg.get("adsorption"), {"kind": "langmuir"}),
        capillarity=_build("capillarity", _CAP_KINDS, cfg.get("capillarity"), {"kind": "constant"}),
        c_minus=float(cfg.get("c_minus", 1.0)),
        c_plus=float(cfg.get("c_plus", 0.0)),
    )


def load_model(source) -> ModelSet:
    """Build a `ModelSet` from a JSON file path, a JSON string or a dict."""
    if isinstance(source, dict):
        return model_from_config(source)
    text = str(source)
    if text.lstrip().startswith("{"):
        return model_from_config(json.loads(text))
    return model_from_config(json.loads(Path(text).read_text()))


# ---------------------------------------------------------------------------
# evaluation with domain checks

_WHICH = {"f": "__call__", "f_s": "ds", "f_c": "dc", "f_ss": "dss"}


def eval_flux(model: FluxModel, s, c, which="f"):
    if which not in _WHICH:
        raise DomainError(f"which must be one of {sorted(_WHICH)}")
    s_arr, c_arr = np.asarray(s, float), np.asarray(c, float)
    if np.any((s_arr < 0) | (s_arr > 1) | (c_arr < 0) | (c_arr > 1)) or np.any(np.isnan(s_arr + c_arr)):
        raise DomainError(f"(s, c) = ({s}, {c}) outside [0, 1]^2")
    return getattr(model, _WHICH[which])(s, c)


# ---------------------------------------------------------------------------
# assumption validation


@dataclass
class AssumptionCheck:
    name: str
    passed: bool
    first_violation: Optional[tuple] = None
    detail: str = ""


@dataclass
class ValidationReport:
    checks: dict
    s_grid: np.ndarray
    c_grid: np.ndarray
    s_inflection: np.ndarray  # per c_grid point, nan where (F3) fails
    c_star: np.ndarray  # per interior s_grid point, nan where (F4) fails

    @property
    def ok(self):
        return all(ch.passed for ch in self.checks.values())

    def failed(self):
        return [name for name, ch in self.checks.items() if not ch.passed]

    def to_dict(self):
        return {
            "ok": self.ok,
            "checks": {
                k: {"passed": v.passed, "first_violation": v.first_violation, "detail": v.detail}
                for k, v in self.checks.items()
            },
        }


def _single_sign_change(values, margin, first_sign):
    """Index of the sign change in a +...+ -...- pattern (or -...- +...+).

    Returns ``(ok, k, bad)`` where the change lies between ``k-1`` and ``k`` and
    ``bad`` is the first offending index when the pattern is broken. One
    near-zero sample right at the change is tolerated.
    """
    v = first_sign * np.asarray(values)
    n = v.size
    lead = 0
    while lead < n and v[lead] > margin:
        lead += 1
    if lead == 0 or lead == n:
        return False, None, min(lead, n - 1)
    tail_start = lead + 1 if abs(v[lead]) <= margin else lead
    tail = v[tail_start:]
    neg = tail < -margin
    if tail.size == 0 or not np.all(neg):
        bad = tail_start + int(np.argmin(neg)) if tail.size else lead
        return False, None, bad
    return True, lead, None


def _zero_between(x0, x1, y0, y1):
    if y1 == y0:
        return 0.5 * (x0 + x1)
    return x0 - y0 * (x1 - x0) / (y1 - y0)


def validate_assumptions(model: ModelSet, grid_n: int = 256, margin: float = 1e-12) -> ValidationReport:
    """Lattice check of the flux, adsorption and capillarity assumptions.

    Violations are reported, never raised.
    """
    if grid_n < 64:
        raise DomainError("grid_n must be at least 64")
    flux, ads, cap = model.flux, model.adsorption, model.capillarity
    g = np.linspace(0.0, 1.0, grid_n)
    S, C = np.meshgrid(g, g, indexing="xy")  # rows: fixed c, columns: s
    checks = {}
    eval_tol = 1e-10
    deriv_tol = 1e-6

    def first(mask):
        idx = np.argwhere(mask)
        if idx.size == 0:
            return None
        i, j = idx[0]
        return (float(S[i, j]), float(C[i, j]))

    F = np.asarray(flux(S, C), float)
    bad = np.zeros_like(F, bool)
    bad[:, 0] = np.abs(F[:, 0]) > eval_tol
    bad[:, -1] = np.abs(F[:, -1] - 1) > eval_tol
    bad |= ~np.isfinite(F)
    checks["F1"] = AssumptionCheck("F1", not bad.any(), first(bad), "f(0,c)=0, f(1,c)=1")

    Fs = np.asarray(flux.ds(S, C), float)
    bad = np.zeros_like(Fs, bool)
    bad[:, 1:-1] = ~(Fs[:, 1:-1] > margin)
    bad[:, 0] = ~(np.abs(Fs[:, 0]) <= deriv_tol)
    bad[:, -1] = ~(np.abs(Fs[:, -1]) <= deriv_tol)
    checks["F2"] = AssumptionCheck("F2", not bad.any(), first(bad), "f_s>0 inside, f_s=0 at s=0,1")

    Fss = np.asarray(flux.dss(S, C), float)
    s_infl = np.full(grid_n, np.nan)
    f3_bad = None
    for i in range(grid_n):
        row = Fss[i, 1:-1]
        ok, k, bad_idx = _single_sign_change(row, margin, +1)
        if ok:
            s_infl[i] = _zero_between(g[k], g[k + 1], row[k - 1], row[k])
        elif f3_bad is None:
            f3_bad = (float(g[bad_idx + 1]), float(g[i]))
    checks["F3"] = AssumptionCheck("F3", f3_bad is None, f3_bad, "single inflection s^I(c), convex then concave")

    Fc = np.asarray(flux.dc(S, C), float)
    c_star = np.full(grid_n - 2, np.nan)
    f4_bad = None
    for j in range(1, grid_n - 1):
        col = Fc[1:-1, j]
        ok, k, bad_idx = _single_sign_change(col, margin, -1)
        if ok:
            c_star[j - 1] = _zero_between(g[k], g[k + 1], col[k - 1], col[k])
        elif f4_bad is None:
            f4_bad = (float(g[j]), float(g[bad_idx + 1]))
    checks["F4"] = AssumptionCheck("F4", f4_bad is None, f4_bad, "f_c<0 below c*(s), >0 above")

    a0 = float(ads(0.0))
    checks["A1"] = AssumptionCheck(
        "A1", math.isfinite(a0) and abs(a0) <= eval_tol, None if abs(a0) <= eval_tol else (0.0,), "a(0)=0"
    )
    inner = g[1:-1]
    da = np.asarray(ads.d1(inner), float)
    d2a = np.asarray(ads.d2(inner), float)
    bad_da = np.flatnonzero(~(da > margin))
    bad_d2a = np.flatnonzero(~(d2a < -margin))
    checks["A2"] = AssumptionCheck(
        "A2", bad_da.size == 0, (float(inner[bad_da[0]]),) if bad_da.size else None, "a'>0"
    )
    checks["A3"] = AssumptionCheck(
        "A3", bad_d2a.size == 0, (float(inner[bad_d2a[0]]),) if bad_d2a.size else None, "a''<0"
    )

    Acap = np.asarray(cap(S, C), float) * np.ones_like(S)
    bad = ~((Acap >= cap.lo - eval_tol) & (Acap <= cap.hi + eval_tol)) | (cap.lo <= 0) | ~np.isfinite(Acap)
    checks["capillarity"] = AssumptionCheck(
        "capillarity", not bad.any(), first(bad), f"{cap.lo} <= A <= {cap.hi}, A_lo > 0"
    )
    return ValidationReport(checks=checks, s_grid=g, c_grid=g, s_inflection=s_infl, c_star=c_star)


def require_valid(model: ModelSet, force: bool = False) -> None:
    """Reject models failing validation unless ``force`` is set."""
    if force:
        return
    report = model.validation
    if not report.ok:
        raise ModelValidationError(f"model violates assumptions: {', '.join(report.failed())}", report)


def inflection_point(flux: FluxModel, c: float, xtol: float = 1e-13) -> float:
    """``s^I(c)``: the unique sign change of ``f_ss(., c)`` in (0, 1)."""
    from scipy.optimize import brentq

    grid = np.linspace(0.0, 1.0, 513)[1:-1]
    vals = np.asarray(flux.dss(grid, np.full_like(grid, c)), float)
    idx = np.flatnonzero((vals[:-1] > 0) & (vals[1:] <= 0))
    if idx.size != 1:
        raise ModelValidationError(f"f(., {c}) is not S-shaped (inflection count {idx.size})")
    i = idx[0]
    return brentq(lambda x: float(flux.dss(x, c)), grid[i], grid[i + 1], xtol=xtol)
