"""Full Riemann solutions: s-wave, c-shock, s-wave.

For data ``(1, c^-) | (0, c^+)`` the solution is

    u^L --s-wave--> u^- --c-shock--> u^+ --s-wave--> u^R

with both s-waves at constant concentration. The c-shock speed and its
end states come from the travelling-wave connection for the chosen
dissipation ratio; `solve_lax_baseline` gives the ``kappa -> 0`` limit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from chemflood import tolerances
from chemflood.connect import (
    ConnectionResult,
    find_kappa_for_v,
    find_v_for_kappa,
    rh_residuals,
)
from chemflood.errors import AssemblyError, DomainError
from chemflood.models import ModelSet
from chemflood.odeint import dopri
from chemflood.scalar import ScalarFan, Shock, solve_scalar_riemann
from chemflood.twave import SystemKind, line_roots, velocity_window

# slack for speed comparisons between independently rounded quantities
_SPEED_SLACK = 1e-9


@dataclass(frozen=True)
class CShockWave:
    u_minus: Tuple[float, float]
    u_plus: Tuple[float, float]
    v: float
    kappa: float
    rh_residuals: Tuple[float, float]


@dataclass(frozen=True, eq=False)
class WaveSequence:
    model: ModelSet
    left_fan: ScalarFan
    shock: CShockWave
    right_fan: ScalarFan
    connection: Optional[ConnectionResult] = None
    lax: bool = False

    @property
    def v(self):
        return self.shock.v

    def speed_chain(self):
        """``(left final edge, v, right initial edge)``; empty fans report ``v``."""
        left = self.left_fan.v_final if not self.left_fan.empty else self.v
        right = self.right_fan.v_initial if not self.right_fan.empty else self.v
        return left, self.v, right

    def discontinuities(self):
        """Speeds at which the profile jumps."""
        out = [el.speed for fan in (self.left_fan, self.right_fan) for el in fan.elements if isinstance(el, Shock)]
        out.append(self.v)
        return sorted(out)

    def to_dict(self):
        def fan_dict(fan):
            return {
                "c": fan.c, "sL": fan.sL, "sR": fan.sR, "v_initial": fan.v_initial, "v_final": fan.v_final,
                "elements": [
                    {"kind": el.kind, **{k: getattr(el, k) for k in el.__dataclass_fields__}}
                    for el in fan.elements
                ],
            }

        return {
            "lax_baseline": self.lax,
            "left_fan": fan_dict(self.left_fan),
            "c_shock": {
                "u_minus": list(self.shock.u_minus), "u_plus": list(self.shock.u_plus),
                "v": self.shock.v, "kappa": self.shock.kappa, "rh_residuals": list(self.shock.rh_residuals),
            },
            "right_fan": fan_dict(self.right_fan),
            "speed_chain": list(self.speed_chain()),
        }


def _assemble(model, v, kappa, s_minus, s_plus, connection=None, lax=False):
    left = solve_scalar_riemann(model.flux, model.c_minus, 1.0, s_minus)
    right = solve_scalar_riemann(model.flux, model.c_plus, s_plus, 0.0)
    rh = rh_residuals(model, v, s_minus, s_plus)
    shock = CShockWave((s_minus, model.c_minus), (s_plus, model.c_plus), v, kappa, rh)
    seq = WaveSequence(model, left, shock, right, connection, lax)
    lo, mid, hi = seq.speed_chain()
    if left.empty and v < 0:
        raise AssemblyError(f"negative c-shock speed {v}", (lo, mid, hi))
    if lo > mid + _SPEED_SLACK or mid > hi + _SPEED_SLACK:
        raise AssemblyError(f"waves not compatible by speed: {lo} <= {mid} <= {hi} fails", (lo, mid, hi))
    return seq


def solve_riemann(model: ModelSet, kappa: float, kind=SystemKind.NONEQ, tol=None) -> WaveSequence:
    """Admissible solution for ``(1, c^-) | (0, c^+)`` at dissipation ratio ``kappa``."""
    conn = find_v_for_kappa(model, kappa, kind, tol=tol)
    return _assemble(model, conn.v, kappa, conn.s_minus, conn.s_plus, conn)


def solve_with_speed(model: ModelSet, v: float, kind=SystemKind.NONEQ, tol=None) -> WaveSequence:
    """As `solve_riemann` but parameterized by the shock speed."""
    conn = find_kappa_for_v(model, v, kind, tol=tol)
    return _assemble(model, v, conn.kappa, conn.s_minus, conn.s_plus, conn)


def solve_lax_baseline(model: ModelSet) -> WaveSequence:
    """The ``kappa -> 0`` limit: c-shock at ``v_max`` between the saddles there."""
    window = velocity_window(model)
    v = window.v_max
    d1 = model.chord.d1
    r_minus = line_roots(model.flux, model.c_minus, v, d1)
    r_plus = line_roots(model.flux, model.c_plus, v, d1)
    if not r_minus or not r_plus:
        raise AssemblyError("no critical points at v_max", (v,))
    return _assemble(model, v, 0.0, r_minus[-1], r_plus[0], None, lax=True)


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class SolutionProfile:
    xi: np.ndarray
    s: np.ndarray
    c: np.ndarray
    labels: List[str]

    def rows(self):
        return list(zip(self.xi.tolist(), self.s.tolist(), self.c.tolist()))


def sample_profile(seq: WaveSequence, xi_grid) -> SolutionProfile:
    """Evaluate ``(s, c)`` at the self-similar coordinates ``xi = x/t``."""
    xi = np.asarray(xi_grid, float)
    if np.any(np.diff(xi) < 0):
        raise DomainError("xi grid must be sorted")
    left = xi <= seq.v
    s = np.where(left, seq.left_fan.state(xi), seq.right_fan.state(xi))
    c = np.where(left, seq.model.c_minus, seq.model.c_plus)
    labels = []
    lo, _, hi = seq.speed_chain()
    l0 = seq.left_fan.v_initial if not seq.left_fan.empty else seq.v
    r1 = seq.right_fan.v_final if not seq.right_fan.empty else seq.v
    for x in xi:
        if x < l0:
            labels.append("left-state")
        elif x < lo:
            labels.append("left-wave")
        elif x <= seq.v:
            labels.append("minus-state")
        elif x <= hi:
            labels.append("plus-state")
        elif x <= r1:
            labels.append("right-wave")
        else:
            labels.append("right-state")
    return SolutionProfile(xi, np.asarray(s, float), np.asarray(c, float), labels)


def profile_distance(a: WaveSequence, b: WaveSequence, xi_grid, collar: float = 1e-3) -> float:
    """Sup-norm of the saturation difference away from ``collar``-wide bands at jumps."""
    xi = np.asarray(xi_grid, float)
    keep = np.ones_like(xi, bool)
    for x0 in a.discontinuities() + b.discontinuities():
        keep &= np.abs(xi - x0) > collar
    sa = sample_profile(a, xi[keep]).s
    sb = sample_profile(b, xi[keep]).s
    return float(np.max(np.abs(sa - sb))) if sa.size else 0.0


# ---------------------------------------------------------------------------
# travelling-wave reconstruction


@dataclass
class ProfileReport:
    xi: np.ndarray
    s: np.ndarray
    c: np.ndarray
    alpha: np.ndarray
    limit_error: float
    eq8_residual: float
    alpha_residual: float
    drift: float
    monotone: bool
    tolerances: dict = field(default_factory=dict)

    @property
    def ok(self):
        t = self.tolerances
        return (self.limit_error < t["limits"] and self.eq8_residual < t["eq8"]
                and self.alpha_residual < t["eq8"])

    def to_dict(self):
        return {k: getattr(self, k) for k in ("limit_error", "eq8_residual", "alpha_residual", "drift", "monotone")} | {
            "ok": self.ok}


def _fd5(fun, x, h):
    return (fun(x - 2 * h) - 8 * fun(x - h) + 8 * fun(x + h) - fun(x + 2 * h)) / (12 * h)


def verify_travelling_profile(model: ModelSet, result: ConnectionResult, xi_span: Optional[float] = None,
                              n: int = 401, tol=None, retry: bool = True) -> ProfileReport:
    """Rebuild ``(s, c, alpha)(xi)`` from a connection and check it solves the wave equations.

    ``c(xi)`` solves the scalar chemical equation from ``c0`` at ``xi = 0``
    and ``s = s_conn(c)``. Checked: the far-field limits, the integrated
    saturation relation ``f - v s - v d1 = A s_xi`` (with ``s_xi`` by finite
    differences of the composed profile), the adsorption relation and, for
    relaxation, ``-v kappa alpha_xi = a(c) - alpha``.
    """
    tol = tol or tolerances.get()
    system = result.system
    v, kappa = result.v, result.kappa
    d1, d2 = model.chord.d1, model.chord.d2
    rate = system.c_rate_scale / kappa
    lam = min(abs(rate * (d1 - model.adsorption.d1(c))) for c in (model.c_minus, model.c_plus))
    if xi_span is None:
        xi_span = 40.0 / lam
    fwd = dopri(lambda t, c: rate * system.red(c), 0.0, result.c0, xi_span, 1e-13, 1e-15, max_steps=200000)
    bwd = dopri(lambda t, c: rate * system.red(c), 0.0, result.c0, -xi_span, 1e-13, 1e-15, max_steps=200000)

    def c_of(x):
        x = np.asarray(x, float)
        return np.where(x >= 0, fwd(np.maximum(x, 0.0)), bwd(np.minimum(x, 0.0)))

    def s_of(x):
        cs = np.atleast_1d(c_of(x))
        out = np.array([result.s_of_c(min(max(ci, model.c_plus), model.c_minus)) for ci in cs])
        return out if np.ndim(x) else float(out[0])

    edge = 0.5 * xi_span
    xi = np.linspace(-edge, edge, n)
    c = np.asarray(c_of(xi), float)
    s = np.asarray(s_of(xi), float)
    alpha = d1 * c - d2
    limit_error = max(abs(float(s_of(-xi_span)) - result.s_minus), abs(float(s_of(xi_span)) - result.s_plus))

    h = 1e-3 / lam
    s_xi = _fd5(s_of, xi, h)
    A = np.asarray(model.capillarity(s, c), float) + 0 * s
    f = np.asarray(model.flux(s, c), float)
    eq8 = float(np.max(np.abs(f - v * s - v * d1 - A * s_xi)))
    # adsorption from the second integrated relation, compared to the chord
    alpha_eq8 = (c * f - v * c * s - c * A * s_xi - v * d2) / v
    alpha_res = float(np.max(np.abs(alpha_eq8 - alpha)))
    if system.kind is SystemKind.NONEQ:
        a_xi = _fd5(lambda x: d1 * c_of(x) - d2, xi, h)
        relax = np.abs(-v * kappa * a_xi - (np.asarray(model.adsorption(c)) - alpha))
        alpha_res = max(alpha_res, float(np.max(relax)))

    # short planar integration from the mid-point; the connection is unstable so only a short span is used
    span = 1.0 / lam
    y0 = np.array([result.s_of_c(result.c0), result.c0])
    planar = dopri(lambda t, y: np.array(system.rhs(float(y[0]), float(y[1]))), 0.0, y0, span, 1e-12, 1e-14,
                   max_steps=200000)
    drift = abs(float(planar.y_final[0]) - float(s_of(span)))
    monotone = bool(np.all(np.diff(s) <= 1e-14))

    report = ProfileReport(xi, s, c, alpha, limit_error, eq8, alpha_res, drift, monotone,
                           {"limits": 1e-6, "eq8": 1e-8})
    if not report.ok and retry:
        from dataclasses import replace

        tight = replace(tol, ode_rtol=tol.ode_rtol / 10, ode_atol=tol.ode_atol / 10)
        again = find_kappa_for_v(model, v, system.kind, result.c0, tight)
        return verify_travelling_profile(model, again, xi_span, n, tight, retry=False)
    return report
