"""Fixed-concentration scalar Riemann problems (s-waves).

For constant ``c`` the saturation obeys ``s_t + f(s, c)_x = 0``. The entropy
solution between ``sL > sR`` follows the smallest concave majorant of
``f(., c)`` on ``[sR, sL]``; for ``sL < sR`` the largest convex minorant on
``[sL, sR]``. Slopes of the envelope are the self-similar wave speeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np
from scipy.optimize import brentq

from chemflood.errors import DomainError


@dataclass(frozen=True)
class Segment:
    a: float
    b: float
    kind: str  # "f" (coincides with the flux) or "chord"


@dataclass(frozen=True, eq=False)
class EnvelopeResult:
    """Piecewise description of a concave (``upper``) or convex envelope."""

    flux: object
    c: float
    s_lo: float
    s_hi: float
    segments: List[Segment]
    upper: bool = True

    @property
    def breakpoints(self):
        pts = [self.segments[0].a] + [seg.b for seg in self.segments]
        return np.array(pts)

    @property
    def chords(self):
        return [seg for seg in self.segments if seg.kind == "chord"]

    def _locate(self, s):
        for seg in self.segments:
            if s <= seg.b:
                return seg
        return self.segments[-1]

    def _chord_slope(self, seg):
        fa, fb = float(self.flux(seg.a, self.c)), float(self.flux(seg.b, self.c))
        return (fb - fa) / (seg.b - seg.a)

    def value(self, s):
        """Envelope value at ``s`` (scalar or array)."""
        s_arr = np.atleast_1d(np.asarray(s, float))
        out = np.empty_like(s_arr)
        for i, x in enumerate(s_arr):
            seg = self._locate(x)
            if seg.kind == "f":
                out[i] = self.flux(x, self.c)
            else:
                fa = float(self.flux(seg.a, self.c))
                out[i] = fa + self._chord_slope(seg) * (x - seg.a)
        return out if np.ndim(s) else float(out[0])

    def slope(self, s):
        """``g(s)``: the envelope slope, i.e. the wave speed carrying ``s``."""
        s_arr = np.atleast_1d(np.asarray(s, float))
        out = np.empty_like(s_arr)
        for i, x in enumerate(s_arr):
            seg = self._locate(x)
            out[i] = self.flux.ds(x, self.c) if seg.kind == "f" else self._chord_slope(seg)
        return out if np.ndim(s) else float(out[0])


def _hull_indices(x, y):
    """Vertices of the upper hull of the points ``(x, y)`` with ``x`` sorted.

    Collinear points are dropped, so grazing contacts fall into chords.
    """
    hull: List[int] = []
    for i in range(len(x)):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def _polish_tangency(f, fs, anchor, t_guess, lo, hi, spacing, tol):
    """Contact point ``t`` of the tangent to ``f`` through ``(anchor, f(anchor))``."""
    fa = f(anchor)

    def phi(t):
        return fs(t) * (t - anchor) - (f(t) - fa)

    for width in (1, 2, 4, 8):
        a = max(lo, t_guess - width * spacing)
        b = min(hi, t_guess + width * spacing)
        if anchor > a and anchor < b:
            # keep the bracket on one side of the anchor
            if t_guess > anchor:
                a = anchor + 0.5 * (t_guess - anchor)
            else:
                b = anchor + 0.5 * (t_guess - anchor)
        pa, pb = phi(a), phi(b)
        if pa == 0.0:
            return a
        if pb == 0.0:
            return b
        if pa * pb < 0:
            # the speed residual is about f_ss times the contact error, so polish well below tol
            return brentq(phi, a, b, xtol=1e-3 * tol, rtol=4 * np.finfo(float).eps)
    return t_guess


def upper_concave_envelope(flux, c: float, s_lo: float, s_hi: float, grid_n: int = 4096,
                           tol: float = 1e-12, upper: bool = True) -> EnvelopeResult:
    """Smallest concave majorant of ``flux(., c)`` on ``[s_lo, s_hi]``.

    With ``upper=False`` returns the largest convex minorant instead (the
    mirror construction used for increasing saturation jumps). Tangency
    points of chords are polished by root finding on the tangent condition
    until ``|f_s - chord slope|`` is well below ``tol``.
    """
    if not (0.0 <= s_lo < s_hi <= 1.0):
        raise DomainError(f"need 0 <= s_lo < s_hi <= 1, got [{s_lo}, {s_hi}]")
    sign = 1.0 if upper else -1.0
    x = np.linspace(s_lo, s_hi, grid_n + 1)
    y = sign * np.asarray(flux(x, np.full_like(x, c)), float)
    hull = _hull_indices(x, y)

    # consecutive grid neighbours on the hull mean contact with f
    segments: List[list] = []
    for i0, i1 in zip(hull[:-1], hull[1:]):
        kind = "f" if i1 - i0 == 1 else "chord"
        if segments and segments[-1][2] == kind == "f":
            segments[-1][1] = i1
        else:
            segments.append([i0, i1, kind])

    f = lambda s: float(flux(s, c))
    fs = lambda s: float(flux.ds(s, c))
    spacing = (s_hi - s_lo) / grid_n
    ends = [[x[i0], x[i1], kind] for i0, i1, kind in segments]

    def smooth_contact(k, left_end):
        # chord endpoint k is a tangency when it borders an f-segment
        nb = k - 1 if left_end else k + 1
        return 0 <= nb < len(ends) and ends[nb][2] == "f"

    for _ in range(4):
        for k, seg in enumerate(ends):
            if seg[2] != "chord":
                continue
            if smooth_contact(k, True):
                seg[0] = _polish_tangency(f, fs, seg[1], seg[0], s_lo, s_hi, spacing, tol)
                ends[k - 1][1] = seg[0]
            if smooth_contact(k, False):
                seg[1] = _polish_tangency(f, fs, seg[0], seg[1], s_lo, s_hi, spacing, tol)
                ends[k + 1][0] = seg[1]
        if sum(seg[2] == "chord" for seg in ends) <= 1:
            break
    ends = [seg for seg in ends if seg[1] > seg[0]]
    return EnvelopeResult(flux, c, s_lo, s_hi, [Segment(float(a), float(b), k) for a, b, k in ends], upper)


def lower_convex_envelope(flux, c, s_lo, s_hi, grid_n=4096, tol=1e-12) -> EnvelopeResult:
    return upper_concave_envelope(flux, c, s_lo, s_hi, grid_n, tol, upper=False)


# ---------------------------------------------------------------------------
# fans


@dataclass(frozen=True)
class Rarefaction:
    s_start: float
    s_end: float
    speed_start: float
    speed_end: float

    kind = "rarefaction"


@dataclass(frozen=True)
class Shock:
    s_left: float
    s_right: float
    speed: float

    kind = "shock"

    @property
    def speed_start(self):
        return self.speed

    @property
    def speed_end(self):
        return self.speed


Element = Union[Rarefaction, Shock]


@dataclass(frozen=True, eq=False)
class ScalarFan:
    """Self-similar scalar wave fan at fixed ``c`` from ``sL`` to ``sR``."""

    flux: object
    c: float
    sL: float
    sR: float
    elements: List[Element] = field(default_factory=list)

    @property
    def empty(self):
        return not self.elements

    @property
    def v_initial(self) -> Optional[float]:
        return self.elements[0].speed_start if self.elements else None

    @property
    def v_final(self) -> Optional[float]:
        return self.elements[-1].speed_end if self.elements else None

    def speeds(self):
        out = []
        for el in self.elements:
            out.extend([el.speed_start, el.speed_end])
        return out

    def _invert(self, el: Rarefaction, xi):
        # f_s is strictly monotone on a rarefaction, bisect f_s(s) = xi
        lo = np.full_like(xi, el.s_start)
        hi = np.full_like(xi, el.s_end)
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            ahead = (np.asarray(self.flux.ds(mid, np.full_like(mid, self.c))) - el.speed_start) * (
                el.speed_end - el.speed_start
            ) < (xi - el.speed_start) * (el.speed_end - el.speed_start)
            lo = np.where(ahead, mid, lo)
            hi = np.where(ahead, hi, mid)
        return 0.5 * (lo + hi)

    def state(self, xi):
        """Saturation at ``xi = x/t`` (scalar or array); left-continuous at shocks."""
        xi_arr = np.atleast_1d(np.asarray(xi, float))
        s = np.full_like(xi_arr, self.sL)
        if self.empty:
            return s if np.ndim(xi) else float(s[0])
        for el in self.elements:
            if isinstance(el, Shock):
                s = np.where(xi_arr > el.speed, el.s_right, s)
            else:
                inside = (xi_arr > el.speed_start) & (xi_arr < el.speed_end)
                if np.any(inside):
                    s[inside] = self._invert(el, xi_arr[inside])
                s = np.where(xi_arr >= el.speed_end, el.s_end, s)
        return s if np.ndim(xi) else float(s[0])


def solve_scalar_riemann(flux, c: float, sL: float, sR: float, grid_n: int = 4096) -> ScalarFan:
    """Entropy solution of the scalar Riemann problem ``sL | sR`` at fixed ``c``.

    ``sL == sR`` gives an empty fan whose edge speeds are ``None``.
    """
    if sL == sR:
        return ScalarFan(flux, c, sL, sR, [])
    upper = sL > sR
    env = upper_concave_envelope(flux, c, min(sL, sR), max(sL, sR), grid_n, upper=upper)
    segs = list(env.segments)
    if upper:
        # the fan is traversed from sL downwards
        segs = [Segment(seg.b, seg.a, seg.kind) for seg in reversed(segs)]
    elements: List[Element] = []
    for seg in segs:
        if seg.kind == "chord":
            fa, fb = float(flux(seg.a, c)), float(flux(seg.b, c))
            elements.append(Shock(seg.a, seg.b, (fb - fa) / (seg.b - seg.a)))
        else:
            elements.append(Rarefaction(seg.a, seg.b, float(flux.ds(seg.a, c)), float(flux.ds(seg.b, c))))
    return ScalarFan(flux, c, sL, sR, elements)


def edge_speed(fan: ScalarFan, side: str = "initial") -> float:
    """Speed of the leading (``final``) or trailing (``initial``) edge of a fan."""
    if fan.empty:
        raise DomainError("edge speed of an empty fan is undefined")
    if side == "initial":
        return fan.v_initial
    if side == "final":
        return fan.v_final
    raise DomainError(f"side must be 'initial' or 'final', got {side!r}")


def fan_rows(fan: ScalarFan, n: int = 400, xi_lo: Optional[float] = None, xi_hi: Optional[float] = None):
    """Rows ``(xi, s)`` sampling the fan on a uniform ``xi`` grid."""
    if xi_lo is None or xi_hi is None:
        speeds = fan.speeds() or [0.0, 1.0]
        pad = 0.1 * max(1e-3, max(speeds) - min(speeds))
        xi_lo = min(speeds) - pad if xi_lo is None else xi_lo
        xi_hi = max(speeds) + pad if xi_hi is None else xi_hi
    xi = np.linspace(xi_lo, xi_hi, n)
    return list(zip(xi.tolist(), np.asarray(fan.state(xi)).tolist()))
