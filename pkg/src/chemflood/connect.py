"""Saddle-to-saddle connections of the travelling-wave system.

For a Type II portrait the admissible c-shock joins ``u2_minus`` (a saddle
on ``c = c^-``) to ``u1_plus`` (a saddle on ``c = c^+``). The unstable
manifold of the first and the stable manifold of the second are shot to a
common concentration ``c0``; their saturation difference there (the
mismatch) is monotone in both ``kappa`` and ``v``, so bracketing root finders
recover ``kappa(v)`` and ``v(kappa)``.

Away from the red lines trajectories are graphs ``s(c)`` and are integrated
with ``c`` as the independent variable. ``c_xi`` vanishes linearly at
``c^+`` and ``c^-``, so the first ``1e-6`` of concentration next to each
saddle is covered in the ``xi`` parameterization instead.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from chemflood import tolerances
from chemflood.errors import (
    ConnectionNotFoundError,
    ConsistencyError,
    DomainError,
    GeometryError,
    ManifoldLaunchError,
)
from chemflood.models import ModelSet, model_from_config
from chemflood.odeint import integrate
from chemflood.twave import (
    CriticalPoint,
    SystemKind,
    TravellingWaveSystem,
    VelocityWindow,
    critical_points,
    find_point,
    line_roots,
    velocity_window,
)


@dataclass(eq=False)
class ManifoldTrajectory:
    """One branch of a saddle's invariant manifold, stored as ``s(c)``.

    ``c``/``s`` are the samples from the saddle itself to the termination
    point. Between the saddle and ``junction`` (the end of the ``xi`` phase)
    the branch is represented by the straight segment joining them.
    """

    origin: CriticalPoint
    direction: str  # "unstable-forward" or "stable-backward"
    c: np.ndarray
    s: np.ndarray
    termination: str  # reached_c_target, hit_s0, hit_s1
    junction: tuple
    dense: object = None
    offset_discrepancy: Optional[float] = None

    @property
    def c_end(self):
        return float(self.c[-1])

    @property
    def s_end(self):
        return float(self.s[-1])

    def s_at(self, c):
        """Saturation on the branch at concentration ``c`` inside its range."""
        c = float(c)
        c0, s0 = self.origin.c, self.origin.s
        cj, sj = self.junction
        if (c - cj) * (c0 - cj) >= 0:
            return s0 + (sj - s0) * (c - c0) / (cj - c0) if cj != c0 else s0
        return float(self.dense(c))


def _orient(saddle: CriticalPoint, model: ModelSet):
    e_s, e_c = saddle.off_line_vector
    if abs(e_c) < 1e-12:
        raise ManifoldLaunchError(f"eigenvector at {saddle.label} is tangent to the red line")
    inward = -1.0 if saddle.c == model.c_minus else 1.0
    if e_c * inward < 0:
        e_s, e_c = -e_s, -e_c
    return e_s, e_c


def _s_events():
    return (lambda t, y: y[0] if isinstance(y, np.ndarray) else y,
            lambda t, y: (y[0] if isinstance(y, np.ndarray) else y) - 1.0)


# explicit steps beyond which the implicit integrator is cheaper
_STIFF_STEPS = 1500.0


def _xi_phase(system, saddle, e_s, e_c, delta, delta_c, tol):
    """Follow the manifold in ``xi`` until it is ``delta_c`` away from the red line."""
    y0 = np.array([saddle.s + delta * e_s, saddle.c + delta * e_c])
    if abs(delta * e_c) >= delta_c:
        return y0, "reached_c_target"
    inward = 1.0 if e_c > 0 else -1.0
    c_stop = saddle.c + inward * delta_c
    # unstable branches run forward in xi, stable ones backward
    sign = 1.0 if saddle.label.endswith("minus") else -1.0

    def fun(t, y):
        s_xi, c_xi = system.rhs(float(y[0]), float(y[1]))
        return np.array([sign * s_xi, sign * c_xi])

    def jac(t, y):
        return sign * system.jacobian(float(y[0]), float(y[1]))

    ev_s0, ev_s1 = _s_events()
    events = (lambda t, y: y[1] - c_stop, ev_s0, ev_s1)
    lam = abs(saddle.eigenvalues[1])
    decades = math.log(delta_c / abs(delta * e_c))
    span = 20.0 * decades / lam
    stiff = abs(saddle.eigenvalues[0]) / lam * decades > _STIFF_STEPS
    sol = integrate(fun, 0.0, y0, span, tol.ode_rtol, tol.ode_atol, events, tol.explicit_max_steps, jac, stiff)
    if sol.status != "event":
        raise ManifoldLaunchError(f"manifold of {saddle.label} did not leave the boundary layer")
    y = sol.y_final
    return y, ("reached_c_target", "hit_s0", "hit_s1")[sol.event]


def launch_manifold(system: TravellingWaveSystem, saddle: CriticalPoint, direction: Optional[str] = None,
                    c_target: Optional[float] = None, tol=None, delta: Optional[float] = None,
                    check_offset: bool = False) -> ManifoldTrajectory:
    """Integrate the saddle's manifold branch that enters the strip.

    Unstable branches leave ``c^-`` forward in ``xi``; stable branches enter
    ``c^+`` and are integrated backward. ``c_target`` defaults to the far
    red line minus the boundary layer. With ``check_offset`` the launch is
    repeated at half the offset and the endpoint difference recorded.
    """
    tol = tol or tolerances.get()
    model = system.model
    if saddle.kind != "saddle":
        raise ManifoldLaunchError(f"{saddle.label} is a {saddle.kind}, not a saddle")
    expected = "unstable-forward" if saddle.c == model.c_minus else "stable-backward"
    direction = direction or expected
    if direction != expected:
        raise ManifoldLaunchError(f"{saddle.label} has no {direction} branch inside the strip")
    delta = tol.launch_offset if delta is None else delta
    dc_layer = tol.boundary_layer * (model.c_minus - model.c_plus)
    if c_target is None:
        c_target = model.c_plus + dc_layer if saddle.c == model.c_minus else model.c_minus - dc_layer
    e_s, e_c = _orient(saddle, model)
    y, term = _xi_phase(system, saddle, e_s, e_c, delta, dc_layer, tol)
    s_j, c_j = float(y[0]), float(y[1])
    c_list = [saddle.c, c_j]
    s_list = [saddle.s, s_j]
    dense = None
    if term == "reached_c_target" and (c_target - c_j) * e_c > 0:
        kap, scale = system.kappa, system.c_rate_scale

        def slope(c, s):
            return system.slope(s, c)

        def jac(c, s):
            A = model.capillarity(s, c)
            return kap * (model.flux.ds(s, c) - system.v) / (A * scale * system.red(c))

        # explicit steps scale like |d slope/ds| * distance to the line * log(range)
        c_line = saddle.c
        p = abs(jac(c_j, s_j) * (c_j - c_line))
        stiff = p * math.log(abs(c_target - c_line) / abs(c_j - c_line)) / 0.7 > _STIFF_STEPS
        sol = integrate(slope, c_j, s_j, c_target, tol.ode_rtol, tol.ode_atol, _s_events(),
                        tol.explicit_max_steps, jac, stiff)
        dense = sol
        c_list.extend(sol.t[1:].tolist())
        s_list.extend(np.asarray(sol.y[1:], float).tolist())
        term = "reached_c_target" if sol.status == "done" else ("hit_s0", "hit_s1")[sol.event - 0]
    traj = ManifoldTrajectory(saddle, direction, np.array(c_list), np.array(s_list), term, (c_j, s_j), dense)
    if check_offset:
        half = launch_manifold(system, saddle, direction, c_target, tol, delta / 2)
        if half.termination == traj.termination == "reached_c_target":
            traj.offset_discrepancy = abs(half.s_end - traj.s_end)
        else:
            traj.offset_discrepancy = math.inf if half.termination != traj.termination else 0.0
    return traj


# ---------------------------------------------------------------------------
# mismatch


def _saddles(system, tol):
    pts = critical_points(system, tol)
    um = find_point(pts, "u2_minus")
    up = find_point(pts, "u1_plus")
    if um is None or up is None:
        raise GeometryError(f"no saddle pair u2_minus/u1_plus at v={system.v}")
    if um.kind != "saddle" or up.kind != "saddle":
        raise ManifoldLaunchError(f"saddles degenerate at v={system.v} ({um.kind}, {up.kind})")
    return um, up


def _shoot(system, c0, tol, keep=False):
    um, up = _saddles(system, tol)
    tm = launch_manifold(system, um, c_target=c0, tol=tol)
    if tm.termination != "reached_c_target":
        return (-1.0 if tm.termination == "hit_s0" else 1.0), tm, None
    tp = launch_manifold(system, up, c_target=c0, tol=tol)
    if tp.termination != "reached_c_target":
        return (-1.0 if tp.termination == "hit_s1" else 1.0), tm, tp
    return tm.s_end - tp.s_end, tm, tp


def _default_c0(model):
    return 0.5 * (model.c_plus + model.c_minus)


def connection_mismatch(model: ModelSet, v: float, kappa: float, c0: Optional[float] = None,
                        kind=SystemKind.NONEQ, tol=None) -> float:
    """``s_from_minus(c0) - s_into_plus(c0)``; positive when the unstable branch passes above.

    A branch leaving through ``s = 0`` or ``s = 1`` before ``c0`` saturates
    the result at ``-1`` or ``+1``.
    """
    tol = tol or tolerances.get()
    c0 = _default_c0(model) if c0 is None else c0
    if not model.c_plus < c0 < model.c_minus:
        raise DomainError(f"c0={c0} must lie strictly between c^+ and c^-")
    system = TravellingWaveSystem(model, v, kappa, kind)
    return _shoot(system, c0, tol)[0]


# ---------------------------------------------------------------------------
# connection results


def rh_residuals(model: ModelSet, v: float, s_minus: float, s_plus: float):
    """Residuals of both jump conditions for the c-shock ``(s^-, c^-) -> (s^+, c^+)``."""
    f, a = model.flux, model.adsorption
    cm, cp = model.c_minus, model.c_plus
    fm, fp = float(f(s_minus, cm)), float(f(s_plus, cp))
    r1 = v * (s_minus - s_plus) - (fm - fp)
    r2 = v * (cm * s_minus + a(cm) - cp * s_plus - a(cp)) - (cm * fm - cp * fp)
    return float(r1), float(r2)


@dataclass(eq=False)
class ConnectionResult:
    model: ModelSet
    v: float
    kappa: float
    s_minus: float
    s_plus: float
    minus: Optional[ManifoldTrajectory]
    plus: Optional[ManifoldTrajectory]
    mismatch: float
    c0: float
    kind: SystemKind = SystemKind.NONEQ
    at_window_boundary: bool = False
    evaluations: int = 0

    @property
    def system(self):
        return TravellingWaveSystem(self.model, self.v, self.kappa, self.kind)

    @property
    def rh(self):
        return rh_residuals(self.model, self.v, self.s_minus, self.s_plus)

    def s_of_c(self, c):
        """Merged trajectory: the stable branch below ``c0``, the unstable one above."""
        return self.plus.s_at(c) if c < self.c0 else self.minus.s_at(c)

    def samples(self):
        """``(c, s)`` samples of the merged trajectory in increasing ``c``."""
        lo = self.plus.c <= self.c0
        hi = self.minus.c > self.c0
        c = np.concatenate([self.plus.c[lo], self.minus.c[hi][::-1]])
        s = np.concatenate([self.plus.s[lo], self.minus.s[hi][::-1]])
        return c, s

    def slopes(self):
        """``ds/dc`` from the vector field at every interior sample."""
        c, s = self.samples()
        inner = (c > self.model.c_plus) & (c < self.model.c_minus)
        system = self.system
        return np.array([system.slope(si, ci) for ci, si in zip(c[inner], s[inner])])

    def to_dict(self):
        r1, r2 = self.rh
        return {
            "v": self.v, "kappa": self.kappa, "s_minus": self.s_minus, "s_plus": self.s_plus,
            "c_minus": self.model.c_minus, "c_plus": self.model.c_plus, "c0": self.c0,
            "system": SystemKind(self.kind).value, "mismatch": self.mismatch,
            "rh_residuals": [r1, r2], "at_window_boundary": self.at_window_boundary,
        }


def integral_identity(result: ConnectionResult):
    """Both sides of ``s^- - s^+ = kappa * int (1/h) g / (A red) dc`` along the trajectory.

    The integral is evaluated by adaptive quadrature over the merged
    trajectory; returns ``(lhs, rhs, residual)``.
    """
    system = result.system
    model = result.model
    scale = system.c_rate_scale

    def integrand(c):
        s = result.s_of_c(c)
        return system.black(s, c) / (model.capillarity(s, c) * scale * system.red(c))

    cuts = [model.c_plus, result.plus.junction[0], result.c0, result.minus.junction[0], model.c_minus]
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b > a:
            total += quad(integrand, a, b, epsabs=1e-13, epsrel=1e-10, limit=400)[0]
    lhs = result.s_minus - result.s_plus
    rhs = result.kappa * total
    return lhs, rhs, lhs - rhs


# ---------------------------------------------------------------------------
# kappa(v)


def _check_window_speed(window: VelocityWindow, v: float):
    if not window.v_min < v < window.v_max:
        raise DomainError(f"v={v} outside the Type II window ({window.v_min}, {window.v_max})")


def find_kappa_for_v(model: ModelSet, v: float, kind=SystemKind.NONEQ, c0: Optional[float] = None,
                     tol=None, window: Optional[VelocityWindow] = None) -> ConnectionResult:
    """The unique ``kappa`` whose trajectory joins ``u2_minus`` to ``u1_plus`` at speed ``v``.

    Brackets by factors of 4 from ``kappa = 1``, then solves the mismatch
    on ``log kappa`` to relative width ``tol.kappa_rtol``.
    """
    tol = tol or tolerances.get()
    window = window or velocity_window(model)
    _check_window_speed(window, v)
    c0 = _default_c0(model) if c0 is None else c0
    base = TravellingWaveSystem(model, v, 1.0, kind)
    count = 0

    def mismatch(log_k):
        nonlocal count
        count += 1
        return _shoot(base.with_params(kappa=math.exp(log_k)), c0, tol)[0]

    lo = hi = 0.0
    m_lo = m_hi = mismatch(0.0)
    lim_lo, lim_hi = math.log(tol.kappa_min), math.log(tol.kappa_max)
    step = math.log(4.0)
    if m_lo > 0:
        while m_hi > 0:
            lo, m_lo = hi, m_hi
            hi += step
            if hi > lim_hi:
                raise ConnectionNotFoundError(f"mismatch stays positive up to kappa={tol.kappa_max:g} at v={v}")
            m_hi = mismatch(hi)
    elif m_lo < 0:
        while m_lo < 0:
            hi, m_hi = lo, m_lo
            lo -= step
            if lo < lim_lo:
                raise ConnectionNotFoundError(f"mismatch stays negative down to kappa={tol.kappa_min:g} at v={v}")
            m_lo = mismatch(lo)
    if m_lo == 0 or m_hi == 0:
        root = lo if m_lo == 0 else hi
    else:
        root = brentq(mismatch, lo, hi, xtol=tol.kappa_rtol, rtol=4 * np.finfo(float).eps, maxiter=200)
    kappa = math.exp(root)
    system = base.with_params(kappa=kappa)
    m, tm, tp = _shoot(system, c0, tol)
    if tp is None or tm.termination != "reached_c_target" or tp.termination != "reached_c_target":
        raise ConnectionNotFoundError(f"manifolds do not reach c0 at the converged kappa={kappa} (v={v})")
    tm = launch_manifold(system, tm.origin, tol=tol, c_target=c0, check_offset=True)
    tp = launch_manifold(system, tp.origin, tol=tol, c_target=c0, check_offset=True)
    return ConnectionResult(model, v, kappa, tm.origin.s, tp.origin.s, tm, tp, m, c0, SystemKind(kind),
                            False, count + 1)


# ---------------------------------------------------------------------------
# kappa_crit and v(kappa)

_KAPPA_CRIT_CACHE: dict = {}


def kappa_crit(model: ModelSet, kind=SystemKind.NONEQ, tol=None, window=None, levels: int = 4) -> float:
    """Limit of ``kappa(v)`` as ``v`` approaches ``v_max`` for a Type II-IV window.

    ``kappa`` is sampled at ``v_max - h 4^-j`` and the limit taken by Aitken
    extrapolation of the last three values; zero for Type II-III windows.
    """
    tol = tol or tolerances.get()
    window = window or velocity_window(model)
    if window.v_max_kind == "II_III":
        return 0.0
    key = (id(model), SystemKind(kind), tol)
    if key in _KAPPA_CRIT_CACHE:
        return _KAPPA_CRIT_CACHE[key]
    h = 1e-3 * window.width
    ks = [find_kappa_for_v(model, window.v_max - h * 4.0**-j, kind, tol=tol, window=window).kappa
          for j in range(levels)]
    k0, k1, k2 = ks[-3:]
    denom = (k2 - k1) - (k1 - k0)
    limit = k2 if denom == 0 else k2 - (k2 - k1) ** 2 / denom
    _KAPPA_CRIT_CACHE[key] = float(limit)
    return float(limit)


def _boundary_connection(model, kappa, kind, tol, window):
    """Connection reported at ``v_max`` for ``kappa <= kappa_crit`` (Type II-IV)."""
    v = window.v_max
    d1 = model.chord.d1
    r_minus = line_roots(model.flux, model.c_minus, v, d1)
    r_plus = line_roots(model.flux, model.c_plus, v, d1)
    if not r_minus or not r_plus:
        raise GeometryError("missing critical points at v_max")
    s_minus, s_plus = r_minus[-1], r_plus[0]
    return ConnectionResult(model, v, kappa, s_minus, s_plus, None, None, 0.0, _default_c0(model),
                            SystemKind(kind), True, 0)


def find_v_for_kappa(model: ModelSet, kappa: float, kind=SystemKind.NONEQ, c0: Optional[float] = None,
                     tol=None) -> ConnectionResult:
    """The unique admissible shock speed for dissipation ratio ``kappa``.

    Bisects the sign of the mismatch in ``v``: it is positive while
    ``kappa < kappa(v)``, and ``kappa(v)`` decreases in ``v``.
    """
    if not kappa > 0:
        raise DomainError(f"kappa must be positive, got {kappa}")
    tol = tol or tolerances.get()
    window = velocity_window(model)
    c0 = _default_c0(model) if c0 is None else c0
    if window.v_max_kind == "II_IV" and kappa <= kappa_crit(model, kind, tol, window):
        return _boundary_connection(model, kappa, kind, tol, window)
    count = 0

    def mismatch(v):
        nonlocal count
        count += 1
        return _shoot(TravellingWaveSystem(model, v, kappa, kind), c0, tol)[0]

    edge = 1e-9 * window.width
    lo, hi = window.v_min + edge, window.v_max - edge
    m_lo = mismatch(lo)
    if m_lo <= 0:
        raise ConnectionNotFoundError(f"kappa={kappa:g} exceeds kappa(v) at the lower window edge")
    m_hi = mismatch(hi)
    if m_hi >= 0:
        v = hi
    else:
        v = brentq(mismatch, lo, hi, xtol=tol.v_rtol * window.v_max, rtol=4 * np.finfo(float).eps, maxiter=200)
    system = TravellingWaveSystem(model, v, kappa, kind)
    m, tm, tp = _shoot(system, c0, tol)
    if tp is None:
        raise ConnectionNotFoundError(f"manifolds do not reach c0 at the converged v={v} (kappa={kappa})")
    return ConnectionResult(model, v, kappa, tm.origin.s, tp.origin.s, tm, tp, m, c0, SystemKind(kind),
                            False, count + 1)


# ---------------------------------------------------------------------------
# v-kappa curve


@dataclass(frozen=True)
class CurveSample:
    v: float
    kappa: float
    s_minus: float
    s_plus: float
    rh_residual: float
    integral_residual: float
    mismatch: float
    at_window_boundary: bool = False
    min_slope: float = math.nan


@dataclass(frozen=True)
class VKappaCurve:
    samples: List[CurveSample]
    kappa_crit: float
    window: VelocityWindow
    kind: SystemKind = SystemKind.NONEQ

    @property
    def v(self):
        return np.array([p.v for p in self.samples])

    @property
    def kappa(self):
        return np.array([p.kappa for p in self.samples])

    def rows(self):
        return [(p.v, p.kappa, p.s_minus, p.s_plus, p.rh_residual) for p in self.samples]


def _sample_from(result: ConnectionResult) -> CurveSample:
    rh = max(abs(r) for r in result.rh)
    if result.minus is None:
        return CurveSample(result.v, result.kappa, result.s_minus, result.s_plus, rh, math.nan,
                           result.mismatch, result.at_window_boundary)
    residual = integral_identity(result)[2]
    slopes = result.slopes()
    return CurveSample(result.v, result.kappa, result.s_minus, result.s_plus, rh, residual, result.mismatch,
                       result.at_window_boundary, float(slopes.min()) if slopes.size else math.nan)


def _sweep_task(args):
    config, mode, value, kind, tol = args
    model = model_from_config(config)
    if mode == "v":
        res = find_kappa_for_v(model, value, kind, tol=tol)
    else:
        res = find_v_for_kappa(model, value, kind, tol=tol)
    return _sample_from(res)


def sweep_grid(window: VelocityWindow, n: int, spacing: str = "uniform-in-v", kappa_range=(1e-3, 1e3)):
    """Sweep abscissae: interior speeds ``v_min + W i/(n+1)`` or log-spaced ``kappa`` values."""
    if spacing == "uniform-in-v":
        return [window.v_min + window.width * i / (n + 1) for i in range(1, n + 1)]
    if spacing == "log-in-kappa":
        return np.geomspace(kappa_range[0], kappa_range[1], n).tolist()
    raise DomainError(f"unknown spacing {spacing!r}")


def sweep_curve(model: ModelSet, n: int = 50, spacing: str = "uniform-in-v", kind=SystemKind.NONEQ,
                jobs: int = 1, tol=None, kappa_range=(1e-3, 1e3)) -> VKappaCurve:
    """Sample the admissible ``(v, kappa)`` curve and check it is strictly decreasing.

    Every sample carries its jump-condition residual and the residual of the
    integral identity ``s^- - s^+ = kappa * integral``.
    """
    if n < 2:
        raise DomainError("a sweep needs at least two points")
    tol = tol or tolerances.get()
    kind = SystemKind(kind)
    window = velocity_window(model)
    mode = "v" if spacing == "uniform-in-v" else "kappa"
    grid = sweep_grid(window, n, spacing, kappa_range)
    config = model.to_config()
    portable = config["flux"].get("kind") != "custom"
    if jobs > 1 and portable:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            samples = list(pool.map(_sweep_task, [(config, mode, x, kind, tol) for x in grid]))
    else:
        samples = []
        for x in grid:
            res = find_kappa_for_v(model, x, kind, tol=tol, window=window) if mode == "v" else \
                find_v_for_kappa(model, x, kind, tol=tol)
            samples.append(_sample_from(res))
    samples.sort(key=lambda p: (p.v, -p.kappa))
    k_crit = kappa_crit(model, kind, tol, window) if window.v_max_kind == "II_IV" else 0.0
    interior = [p for p in samples if not p.at_window_boundary]
    for a, b in zip(interior, interior[1:]):
        if b.kappa > a.kappa * (1 + tol.kappa_rtol) and b.v > a.v:
            raise ConsistencyError(f"kappa increases between v={a.v} and v={b.v}: {a.kappa} -> {b.kappa}")
    return VKappaCurve(samples, k_crit, window, kind)
