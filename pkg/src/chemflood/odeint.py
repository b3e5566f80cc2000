"""Lean embedded Runge-Kutta integrator.

The shooting solvers integrate a *scalar* ODE ``ds/dc`` thousands of times
per sweep; `scipy.integrate.solve_ivp` spends most of its time in per-step
array bookkeeping for such tiny systems. `dopri` is a Dormand-Prince 5(4)
pair with the standard 4th order continuous extension that works on plain
floats (and on small numpy arrays for the planar phases). When its step
budget is exhausted the problem is stiff and callers fall back to `radau`.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from chemflood.errors import StiffnessError

_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
_E = (-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40)
_P = (
    (1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432),
    (0.0, 0.0, 0.0, 0.0),
    (0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799),
    (0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072),
    (0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632),
    (0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844),
    (0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423),
)


class Solution:
    """Piecewise dense output of an integration run.

    ``t``/``y`` hold accepted step endpoints; ``status`` is ``"done"`` or
    ``"event"`` (then ``event`` is the index of the terminal event hit).
    """

    def __init__(self, t, y, interp, status, event=None, nsteps=0, method="dopri"):
        self.t = np.asarray(t, float)
        self.y = np.asarray(y, float)
        self._interp = interp
        self.status = status
        self.event = event
        self.nsteps = nsteps
        self.method = method

    @property
    def t_final(self):
        return float(self.t[-1])

    @property
    def y_final(self):
        return self.y[-1]

    def __call__(self, t):
        return self._interp(t)


def _dense_segments(ts, ys, qs):
    ts = np.asarray(ts)
    increasing = ts[-1] >= ts[0]

    def interp(t):
        t_arr = np.asarray(t, float)
        scalar = t_arr.ndim == 0
        t_arr = np.atleast_1d(t_arr)
        key = ts if increasing else -ts
        tk = t_arr if increasing else -t_arr
        idx = np.clip(np.searchsorted(key, tk, side="right") - 1, 0, len(qs) - 1)
        out = []
        for ti, i in zip(t_arr, idx):
            t0, t1 = ts[i], ts[i + 1]
            h = t1 - t0
            x = (ti - t0) / h if h != 0 else 0.0
            q = qs[i]
            poly = x * (q[0] + x * (q[1] + x * (q[2] + x * q[3])))
            out.append(ys[i] + h * poly)
        out = np.array(out)
        return out[0] if scalar else out

    return interp


def dopri(fun, t0, y0, t_end, rtol=1e-10, atol=1e-12, events=(), max_steps=40000, h0=None,
          detect_stiffness=True):
    """Integrate ``y' = fun(t, y)`` from ``t0`` to ``t_end``.

    ``y0`` may be a float or a 1-D array. ``events`` are callables
    ``g(t, y)``; integration stops at the first sign change of any of them,
    located by root finding on the dense output. Raises `StiffnessError`
    when ``max_steps`` accepted or rejected steps do not reach the end, or
    (with ``detect_stiffness``) after 15 accepted steps whose size is
    limited by stability rather than accuracy (Hairer's DOPRI5 test).
    """
    vector = isinstance(y0, np.ndarray)
    span = t_end - t0
    direction = 1.0 if span >= 0 else -1.0
    if span == 0:
        return Solution([t0], [y0], lambda t: y0, "done")

    def norm(e, y_a, y_b):
        if vector:
            sc = atol + rtol * np.maximum(np.abs(y_a), np.abs(y_b))
            return float(np.max(np.abs(e) / sc))
        return abs(e) / (atol + rtol * max(abs(y_a), abs(y_b)))

    t, y = t0, y0
    k1 = fun(t, y)
    if h0 is None:
        scale = atol + rtol * (np.max(np.abs(y)) if vector else abs(y))
        d0 = (np.max(np.abs(y)) if vector else abs(y)) / scale
        d1 = (np.max(np.abs(k1)) if vector else abs(k1)) / scale
        h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h = min(h, abs(span))
    else:
        h = min(abs(h0), abs(span))

    g_prev = [g(t, y) for g in events]
    ts, ys, qs = [t], [y], []
    steps = 0
    stiff_hits = 0
    while True:
        if steps >= max_steps:
            raise StiffnessError(f"step budget {max_steps} exhausted at t={t:.6g}")
        steps += 1
        hs = direction * min(h, abs(t_end - t))
        k = [k1]
        for i in range(1, 6):
            a = _A[i]
            yi = y
            for j in range(i):
                if a[j] != 0.0:
                    yi = yi + hs * a[j] * k[j]
            k.append(fun(t + _C[i] * hs, yi))
        y_stage6 = yi
        y_new = y
        for i in range(6):
            if _B[i] != 0.0:
                y_new = y_new + hs * _B[i] * k[i]
        t_new = t + hs
        k7 = fun(t_new, y_new)
        k.append(k7)
        e = 0.0 * y
        for i in range(7):
            if _E[i] != 0.0:
                e = e + _E[i] * k[i]
        err = norm(hs * e, y, y_new)
        if not (err <= 1.0) or not np.all(np.isfinite(y_new)):
            fac = 0.2 if not math.isfinite(err) else max(0.2, 0.9 * err ** (-0.2))
            h = abs(hs) * fac
            if h < 1e-15 * max(1.0, abs(t)):
                raise StiffnessError(f"step size underflow at t={t:.6g}")
            continue
        if detect_stiffness:
            num = np.max(np.abs(k7 - k[5])) if vector else abs(k7 - k[5])
            den = np.max(np.abs(y_new - y_stage6)) if vector else abs(y_new - y_stage6)
            if den > 0 and abs(hs) * num / den > 3.25:
                stiff_hits += 1
                if stiff_hits >= 15:
                    raise StiffnessError(f"stiffness detected at t={t_new:.6g}")
            else:
                stiff_hits = 0
        q = [sum(k[i] * _P[i][j] for i in range(7) if _P[i][j] != 0.0) for j in range(4)]
        ts.append(t_new)
        ys.append(y_new)
        qs.append(q)
        hit = None
        for idx, g in enumerate(events):
            g_new = g(t_new, y_new)
            if g_prev[idx] * g_new < 0 or g_new == 0:
                seg = _dense_segments(ts[-2:], ys[-2:], qs[-1:])
                te = brentq(lambda tt: g(tt, seg(tt)), t, t_new, xtol=1e-15 * max(1.0, abs(t_new)))
                if hit is None or direction * (te - hit[1]) < 0:
                    hit = (idx, te)
            g_prev[idx] = g_new
        if hit is not None:
            idx, te = hit
            ye = _dense_segments(ts[-2:], ys[-2:], qs[-1:])(te)
            # shrink the last segment so that it ends at the event
            frac = (te - t) / hs
            q = qs[-1]
            qs[-1] = [q[0] * 1.0, q[1] * frac, q[2] * frac**2, q[3] * frac**3]
            ts[-1], ys[-1] = te, ye
            return Solution(ts, ys, _dense_segments(ts, ys, qs), "event", idx, steps)
        t, y, k1 = t_new, y_new, k7
        if t == t_end or direction * (t_end - t) <= 0:
            return Solution(ts, ys, _dense_segments(ts, ys, qs), "done", None, steps)
        fac = 10.0 if err == 0 else min(10.0, max(0.2, 0.9 * err ** (-0.2)))
        h = abs(hs) * fac


def radau(fun, t0, y0, t_end, rtol=1e-10, atol=1e-12, events=(), jac=None):
    """Stiff fallback through scipy's Radau IIA with the same `Solution` interface."""
    vector = isinstance(y0, np.ndarray)
    y0v = np.atleast_1d(np.asarray(y0, float))

    def f(t, y):
        out = fun(t, y if vector else float(y[0]))
        return np.atleast_1d(out)

    evs = []
    for g in events:
        def ev(t, y, g=g):
            return g(t, y if vector else float(y[0]))

        ev.terminal = True
        evs.append(ev)
    def jac_v(t, y):
        return np.atleast_2d(jac(t, y if vector else float(y[0])))

    sol = solve_ivp(f, (t0, t_end), y0v, method="Radau", rtol=rtol, atol=atol, events=evs or None,
                    jac=jac_v if jac is not None else None, dense_output=True)
    if sol.status == -1:
        raise StiffnessError(f"Radau failed: {sol.message}")
    ys = sol.y.T if vector else sol.y[0]
    dense = sol.sol

    def interp(t):
        v = dense(t)
        return v if vector else v[0]

    status, event = "done", None
    if sol.status == 1:
        status = "event"
        event = next(i for i, te in enumerate(sol.t_events) if len(te))
    return Solution(sol.t, ys, interp, status, event, len(sol.t) - 1, method="radau")


def integrate(fun, t0, y0, t_end, rtol=1e-10, atol=1e-12, events=(), max_steps=40000, jac=None,
              stiff=False):
    """`dopri`, switching to `radau` when the explicit step budget runs out.

    ``stiff=True`` skips the explicit attempt.
    """
    if stiff:
        return radau(fun, t0, y0, t_end, rtol, atol, events, jac)
    try:
        return dopri(fun, t0, y0, t_end, rtol, atol, events, max_steps)
    except StiffnessError:
        return radau(fun, t0, y0, t_end, rtol, atol, events, jac)
