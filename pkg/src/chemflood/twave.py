"""Travelling-wave dynamical systems for the c-shock and their phase portraits.

A c-shock of speed ``v`` between ``(s^-, c^-)`` and ``(s^+, c^+)`` is
admissible when the planar system

    A(s, c) s' = f(s, c) - v (s + d1)
    kappa c'   = h(v) (d1 c - d2 - a(c))

has a trajectory joining the two states. ``h(v) = 1/(v d1)`` for
non-equilibrium adsorption and ``h(v) = v`` for chemical diffusion.
Critical points lie where the black nullcline ``f = v (s + d1)`` meets the
red lines ``c = c^+`` and ``c = c^-``.
"""

from __future__ import annotations

import enum
import math
import weakref
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from chemflood import tolerances
from chemflood.errors import (
    AssumptionViolation,
    DomainError,
    GeometryError,
    NoTypeIIError,
    UnsupportedPortraitError,
)
from chemflood.models import ModelSet, inflection_point


class SystemKind(str, enum.Enum):
    NONEQ = "noneq"  # non-equilibrium adsorption, kappa = eps_r / eps_c
    DIFF = "diff"  # chemical diffusion, kappa = eps_d / eps_c


class PortraitType(str, enum.Enum):
    TYPE0 = "Type0"
    TYPE0_I = "Type0_I"
    TYPEI = "TypeI"
    TYPEI_II = "TypeI_II"
    TYPEII = "TypeII"
    TYPEII_III = "TypeII_III"
    TYPEIII = "TypeIII"
    TYPEII_IV = "TypeII_IV"
    TYPEIII_IV = "TypeIII_IV"
    TYPEIV = "TypeIV"

    @property
    def rank(self):
        return _RANK[self]

    @property
    def wide(self):
        """The wide class (0..IV) this type belongs to, ``None`` for boundary types."""
        return _WIDE.get(self)


_RANK = {t: i for i, t in enumerate(PortraitType)}
_WIDE = {
    PortraitType.TYPE0: "0",
    PortraitType.TYPEI: "I",
    PortraitType.TYPEII: "II",
    PortraitType.TYPEIII: "III",
    PortraitType.TYPEIV: "IV",
}
# wide-class changes that may occur between neighbouring velocities
ALLOWED_TRANSITIONS = {("0", "I"), ("I", "II"), ("II", "III"), ("II", "IV"), ("III", "IV")}


@dataclass(frozen=True, eq=False)
class TravellingWaveSystem:
    """Planar travelling-wave ODE for a c-shock of speed ``v``."""

    model: ModelSet
    v: float
    kappa: float = 1.0
    kind: SystemKind = SystemKind.NONEQ

    def __post_init__(self):
        if not self.v > 0:
            raise DomainError(f"shock speed must be positive, got {self.v}")
        if not self.kappa > 0:
            raise DomainError(f"kappa must be positive, got {self.kappa}")
        object.__setattr__(self, "kind", SystemKind(self.kind))

    @cached_property
    def chord(self):
        return self.model.chord

    @property
    def c_rate_scale(self):
        """``h(v)`` multiplying the chemical equation."""
        if self.kind is SystemKind.NONEQ:
            return 1.0 / (self.v * self.chord.d1)
        return self.v

    def with_params(self, v=None, kappa=None):
        return TravellingWaveSystem(self.model, self.v if v is None else v,
                                    self.kappa if kappa is None else kappa, self.kind)

    def black(self, s, c):
        """``f(s, c) - v (s + d1)``; zero on the black nullcline."""
        return self.model.flux(s, c) - self.v * (s + self.chord.d1)

    def red(self, c):
        """``d1 c - d2 - a(c)``; zero on the red lines, negative between them."""
        return self.chord.d1 * c - self.chord.d2 - self.model.adsorption(c)

    def rhs(self, s, c):
        s_xi = self.black(s, c) / self.model.capillarity(s, c)
        c_xi = self.c_rate_scale * self.red(c) / self.kappa
        return s_xi, c_xi

    def slope(self, s, c):
        """``ds/dc`` along trajectories, i.e. ``s_xi / c_xi``."""
        return self.kappa * self.black(s, c) / (
            self.model.capillarity(s, c) * self.c_rate_scale * self.red(c))

    def jacobian(self, s, c):
        m = self.model
        A = m.capillarity(s, c)
        g = self.black(s, c)
        dA_s = (m.capillarity(min(s + 1e-7, 1.0), c) - m.capillarity(max(s - 1e-7, 0.0), c)) / (
            min(s + 1e-7, 1.0) - max(s - 1e-7, 0.0))
        j11 = (m.flux.ds(s, c) - self.v) / A - g * dA_s / (A * A)
        j12 = m.flux.dc(s, c) / A
        j22 = self.c_rate_scale * (self.chord.d1 - m.adsorption.d1(c)) / self.kappa
        return np.array([[j11, j12], [0.0, j22]])


def rhs(system: TravellingWaveSystem, s, c):
    return system.rhs(s, c)


# ---------------------------------------------------------------------------
# critical points


@dataclass(frozen=True)
class CriticalPoint:
    s: float
    c: float
    label: str  # u1_minus, u2_minus, u1_plus, u2_plus
    kind: str  # source, saddle, sink, saddle-node
    eigenvalues: Tuple[float, float]
    eigenvectors: Tuple[Tuple[float, float], Tuple[float, float]]  # (ds, dc) per eigenvalue
    fs_minus_v: float

    @property
    def off_line_vector(self):
        """Unit eigenvector transversal to the red line, as ``(ds, dc)``."""
        return self.eigenvectors[1]

    def to_dict(self):
        return {
            "s": self.s, "c": self.c, "label": self.label, "kind": self.kind,
            "eigenvalues": list(self.eigenvalues), "fs_minus_v": self.fs_minus_v,
        }


def line_roots(flux, c: float, v: float, d1: float, grid_n: int = 2048, xtol: float = 1e-14) -> List[float]:
    """All roots of ``f(s, c) = v (s + d1)`` in [0, 1].

    Sign scan on ``grid_n`` subintervals; when the scan sees no crossing the
    maximum of the difference is refined so that a pair of roots closer than
    the grid spacing (or a double root) is not lost.
    """
    c = float(c)
    s = np.linspace(0.0, 1.0, grid_n + 1)
    g = np.asarray(flux(s, np.full_like(s, c)), float) - v * (s + d1)

    def gfun(x):
        return float(flux(x, c)) - v * (x + d1)

    up = np.flatnonzero((g[:-1] < 0) & (g[1:] >= 0))
    down = np.flatnonzero((g[:-1] >= 0) & (g[1:] < 0))
    idx = np.sort(np.concatenate([up, down]))
    if idx.size > 2:
        raise AssumptionViolation(f"{idx.size} roots of f = v(s+d1) at c={c}; at most two are allowed")
    roots = []
    for i in idx:
        a, b = s[i], s[i + 1]
        roots.append(b if g[i + 1] == 0 else brentq(gfun, a, b, xtol=xtol))
    if roots or g[-1] >= 0:
        return roots
    i = int(np.argmax(g))
    if i == 0 or i == grid_n:
        return []
    a, b = s[i - 1], s[i + 1]
    dg = lambda x: float(flux.ds(x, c)) - v
    if dg(a) <= 0 or dg(b) >= 0:
        return []
    peak = brentq(dg, a, b, xtol=xtol)
    gp = gfun(peak)
    if gp < -1e-15:
        return []
    if gp <= 1e-15:
        return [peak, peak]
    return [brentq(gfun, a, peak, xtol=xtol), brentq(gfun, peak, b, xtol=xtol)]


def _classify_point(system, s, c, label, tol):
    jac = system.jacobian(s, c)
    j11, j12, j22 = jac[0, 0], jac[0, 1], jac[1, 1]
    fs_minus_v = float(system.model.flux.ds(s, c)) - system.v
    if abs(fs_minus_v) < tol.saddle_node:
        kind = "saddle-node"
    elif j11 > 0 and j22 > 0:
        kind = "source"
    elif j11 < 0 and j22 < 0:
        kind = "sink"
    else:
        kind = "saddle"
    vec = np.array([j12, j22 - j11])
    norm = float(np.hypot(*vec))
    off = (float(vec[0] / norm), float(vec[1] / norm)) if norm > 0 else (0.0, 0.0)
    return CriticalPoint(float(s), float(c), label, kind, (float(j11), float(j22)), ((1.0, 0.0), off), fs_minus_v)


def critical_points(system: TravellingWaveSystem, tol=None) -> List[CriticalPoint]:
    """Critical points on both red lines, labelled ``u{1,2}_{minus,plus}``.

    ``u1`` is the smaller root on a line (where ``f_s > v``), ``u2`` the
    larger one. A double root yields both labels at the same saturation.
    """
    tol = tol or tolerances.get()
    d1 = system.chord.d1
    out = []
    for c, side in ((system.model.c_minus, "minus"), (system.model.c_plus, "plus")):
        roots = line_roots(system.model.flux, c, system.v, d1, tol.root_grid, tol.root_xtol)
        if len(roots) == 1:
            # a single crossing has f_s > v (Type 0): it continues the u1 branch
            labels = ["u1_" + side]
        else:
            labels = ["u1_" + side, "u2_" + side]
        for s, label in zip(roots, labels):
            out.append(_classify_point(system, s, c, label, tol))
    return out


def find_point(points, label) -> Optional[CriticalPoint]:
    return next((p for p in points if p.label == label), None)


# ---------------------------------------------------------------------------
# tangents from Q and the velocity window


def tangent_point(flux, c: float, d1: float, xtol: float = 1e-15) -> Tuple[float, float]:
    """``(s, v)`` of the tangent to ``f(., c)`` from ``Q = (-d1, 0)``.

    Solves ``f_s (s + d1) - f = 0`` on the concave branch ``(s^I(c), 1)``;
    ``v`` is the tangent slope, equal to ``max_s f / (s + d1)``.
    """
    s_infl = inflection_point(flux, c)

    def phi(s):
        return float(flux.ds(s, c)) * (s + d1) - float(flux(s, c))

    lo, hi = s_infl, 1.0
    if not (phi(lo) > 0 > phi(hi)):
        raise GeometryError(f"no tangent from Q to f(., {c}) on the concave branch")
    s = brentq(phi, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
    return s, float(flux(s, c)) / (s + d1)


def tangent_slope_from_Q(model: ModelSet, c: float) -> float:
    return tangent_point(model.flux, c, model.chord.d1)[1]


@dataclass(frozen=True)
class VelocityWindow:
    v_min: float
    v_max: float
    v_max_kind: str  # "II_III" or "II_IV"
    v_0I: float
    c_at_v_min: float
    tangent_minus: float  # tangent slope from Q at c^-
    tangent_plus: float
    coincident_ends: bool = False

    @property
    def width(self):
        return self.v_max - self.v_min

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__} | {"width": self.width}


def _end_curve_intersections(model, n=4096):
    s = np.linspace(0.0, 1.0, n + 1)[1:-1]
    diff = np.asarray(model.flux(s, np.full_like(s, model.c_minus)) - model.flux(s, np.full_like(s, model.c_plus)))
    if np.max(np.abs(diff)) <= 1e-12:
        return None
    dfun = lambda x: float(model.flux(x, model.c_minus) - model.flux(x, model.c_plus))
    idx = np.flatnonzero(np.sign(diff[:-1]) * np.sign(diff[1:]) < 0)
    return [brentq(dfun, s[i], s[i + 1], xtol=1e-15) for i in idx]


_WINDOW_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def velocity_window(model: ModelSet, grid_n: int = 65) -> VelocityWindow:
    """Bifurcation velocities ``v_0I < v_min < v_max`` of the portrait family.

    ``v_min`` minimizes the tangent slope from ``Q`` over ``c``. ``v_max`` is
    the slope of the steepest line from ``Q`` through an intersection of the
    two end curves when that line separates the roots as in a Type II-III
    transition, and otherwise the smaller end-line tangent slope (Type II-IV).
    """
    cached = _WINDOW_CACHE.get(model)
    if cached is not None and cached[0] == grid_n:
        return cached[1]
    d1 = model.chord.d1
    flux = model.flux
    cp, cm = model.c_plus, model.c_minus
    cs = np.linspace(cp, cm, grid_n)
    slopes = np.array([tangent_point(flux, c, d1)[1] for c in cs])
    i = int(np.argmin(slopes))
    T = lambda c: tangent_point(flux, c, d1)[1]
    if 0 < i < grid_n - 1:
        res = minimize_scalar(T, bracket=(cs[i - 1], cs[i], cs[i + 1]), method="golden", tol=1e-10)
        c_min, v_min = float(res.x), float(res.fun)
    else:
        c_min, v_min = float(cs[i]), float(slopes[i])
    t_minus, t_plus = float(slopes[-1]), float(slopes[0])

    crossings = _end_curve_intersections(model)
    coincident = crossings is None
    if coincident:
        kind, v_max = "II_III", t_minus
    else:
        kind, v_max = "II_IV", min(t_minus, t_plus)
        best = None
        for s2 in crossings:
            m = float(flux(s2, cm)) / (s2 + d1)
            if best is None or m > best[1]:
                best = (s2, m)
        if best is not None:
            s2, m = best
            r_minus = line_roots(flux, cm, m, d1)
            r_plus = line_roots(flux, cp, m, d1)
            # s2 must be the upper root on c^- and the lower root on c^+
            if (len(r_minus) == 2 and len(r_plus) == 2
                    and r_minus[0] < s2 - 1e-9 and abs(r_minus[1] - s2) < 1e-8
                    and abs(r_plus[0] - s2) < 1e-8 and r_plus[1] > s2 + 1e-9):
                kind, v_max = "II_III", m
    window = VelocityWindow(v_min, v_max, kind, 1.0 / (1.0 + d1), c_min, t_minus, t_plus, coincident)
    if not v_min < v_max:
        raise NoTypeIIError(f"empty Type II window: v_min={v_min:.12g} >= v_max={v_max:.12g}")
    _WINDOW_CACHE[model] = (grid_n, window)
    return window


# ---------------------------------------------------------------------------
# portrait classification


@dataclass(frozen=True)
class PortraitReport:
    v: float
    points: List[CriticalPoint]
    portrait: PortraitType
    gap: Optional[Tuple[float, float]] = None
    counts: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "v": self.v,
            "portrait": self.portrait.value,
            "gap": list(self.gap) if self.gap else None,
            "points": [p.to_dict() for p in self.points],
            "counts": self.counts,
        }


def root_counts(model: ModelSet, v: float, c_grid, s_grid_n: int = 2048):
    """Number of black-curve points on each horizontal line ``c`` of ``c_grid``."""
    d1 = model.chord.d1
    s = np.linspace(0.0, 1.0, s_grid_n + 1)
    S, C = np.meshgrid(s, np.asarray(c_grid, float))
    g = np.asarray(model.flux(S, C), float) - v * (S + d1)
    pos = g >= 0
    return np.count_nonzero(pos[:, 1:] != pos[:, :-1], axis=1)


def _runs(mask):
    runs, start = [], None
    for i, m in enumerate(mask):
        if m and start is None:
            start = i
        if not m and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(mask) - 1))
    return runs


def classify_portrait(system: TravellingWaveSystem, c_grid_n: int = 513, tol=None) -> PortraitReport:
    """Place the portrait at speed ``system.v`` in the Type 0..IV taxonomy."""
    tol = tol or tolerances.get()
    model, v = system.model, system.v
    points = critical_points(system, tol)
    window = velocity_window(model)
    eps = tol.portrait_type
    cp, cm = model.c_plus, model.c_minus
    c_grid = np.linspace(cp, cm, c_grid_n)
    counts = root_counts(model, v, c_grid)
    if v > window.v_min + eps and window.c_at_v_min not in c_grid:
        # a gap narrower than the grid spacing sits around the tangent minimum
        c_grid = np.sort(np.append(c_grid, window.c_at_v_min))
        counts = root_counts(model, v, c_grid)
    summary = {"c_points": int(len(c_grid)), "min": int(counts.min()), "max": int(counts.max())}

    if abs(v - window.v_0I) <= eps:
        return PortraitReport(v, points, PortraitType.TYPE0_I, None, summary)
    if v < window.v_0I:
        return PortraitReport(v, points, PortraitType.TYPE0, None, summary)
    if abs(v - window.v_min) <= eps:
        return PortraitReport(v, points, PortraitType.TYPEI_II, None, summary)
    if v < window.v_min:
        return PortraitReport(v, points, PortraitType.TYPEI, None, summary)

    gaps = _runs(counts == 0)
    if len(gaps) > 1:
        raise UnsupportedPortraitError(f"black curves split into {len(gaps) + 1} components at v={v}")
    gap = None
    if gaps:
        i0, i1 = gaps[0]
        T = lambda c: tangent_point(model.flux, c, system.chord.d1)[1] - v
        c1 = c_grid[i0] if i0 == 0 else brentq(T, c_grid[i0 - 1], c_grid[i0], xtol=1e-14)
        c2 = c_grid[i1] if i1 == len(c_grid) - 1 else brentq(T, c_grid[i1], c_grid[i1 + 1], xtol=1e-14)
        gap = (float(c1), float(c2))

    near_minus = abs(v - window.tangent_minus) <= eps
    near_plus = abs(v - window.tangent_plus) <= eps
    if window.v_max_kind == "II_III" and abs(v - window.v_max) <= eps:
        return PortraitReport(v, points, PortraitType.TYPEII_III, gap, summary)
    if (v > window.tangent_minus + eps) or (v > window.tangent_plus + eps):
        return PortraitReport(v, points, PortraitType.TYPEIV, gap, summary)

    s_up = find_point(points, "u2_minus")
    s_lo = find_point(points, "u1_plus")
    ordered = s_up is not None and s_lo is not None and s_up.s > s_lo.s
    if window.v_max_kind == "II_III":
        ordered = v < window.v_max
    if near_minus or near_plus:
        kind = PortraitType.TYPEII_IV if ordered else PortraitType.TYPEIII_IV
        return PortraitReport(v, points, kind, gap, summary)
    kind = PortraitType.TYPEII if ordered else PortraitType.TYPEIII
    return PortraitReport(v, points, kind, gap, summary)


def portrait_sequence(model: ModelSet, velocities, kind=SystemKind.NONEQ):
    """Portrait types along a list of speeds."""
    return [classify_portrait(TravellingWaveSystem(model, float(v), 1.0, kind)).portrait for v in velocities]


def sequence_is_ordered(types) -> bool:
    """True when ranks never decrease and wide classes change only along allowed edges."""
    ranks = [t.rank for t in types]
    if any(b < a for a, b in zip(ranks, ranks[1:])):
        return False
    wide = [t.wide for t in types if t.wide is not None]
    return all(a == b or (a, b) in ALLOWED_TRANSITIONS for a, b in zip(wide, wide[1:]))


def nullcline_rows(system: TravellingWaveSystem, n: int = 201):
    """Rows ``(c, s_1, s_2)`` of the black curve; NaN where a branch is absent."""
    model = system.model
    rows = []
    for c in np.linspace(model.c_plus, model.c_minus, n):
        roots = line_roots(model.flux, c, system.v, system.chord.d1)
        r = (roots + [math.nan, math.nan])[:2]
        rows.append((float(c), float(r[0]), float(r[1])))
    return rows
