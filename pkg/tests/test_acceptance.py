"""Acceptance criteria, one test per criterion.

Each test prints a single ``[AC-nn] PASS|FAIL`` line (collected again in the
pytest terminal summary) and then asserts. Tolerances are fixed here and
never loosened to make a criterion pass. Run standalone with
``python tests/test_acceptance.py`` for just the lines.
"""

import time

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from chemflood.connect import connection_mismatch, find_kappa_for_v, find_v_for_kappa, sweep_curve
from chemflood.models import boomerang_model
from chemflood.pdesim import SimConfig, measure_front_speed, simulate
from chemflood.riemann import profile_distance, sample_profile, solve_lax_baseline, solve_riemann
from chemflood.scalar import solve_scalar_riemann, upper_concave_envelope
from chemflood.twave import (
    PortraitType,
    SystemKind,
    TravellingWaveSystem,
    portrait_sequence,
    sequence_is_ordered,
    velocity_window,
)

RESULTS = []


def record(number, title, ok, detail):
    line = f"[AC-{number:02d}] {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


@pytest.fixture(scope="module")
def model():
    return boomerang_model()


@pytest.fixture(scope="module")
def win(model):
    return velocity_window(model)


@pytest.fixture(scope="module")
def sweep(model):
    t0 = time.perf_counter()
    curve = sweep_curve(model, 50)
    return curve, time.perf_counter() - t0


def _dense_slope(flux, c, d1, n=100_000):
    s = np.linspace(0.0, 1.0, n)
    return float(np.max(flux(s, np.full_like(s, c)) / (s + d1)))


def test_ac01_velocity_window():
    fresh = boomerang_model()  # new object, so no cached window
    t0 = time.perf_counter()
    w = velocity_window(fresh)
    elapsed = time.perf_counter() - t0
    d1 = fresh.chord.d1
    T = lambda c: _dense_slope(fresh.flux, c, d1)
    coarse = np.linspace(0.0, 1.0, 201)
    i = int(np.argmin([T(c) for c in coarse]))
    lo, hi = coarse[max(i - 1, 0)], coarse[min(i + 1, 200)]
    best = minimize_scalar(T, bounds=(lo, hi), method="bounded", options={"xatol": 1e-7})
    v_min_oracle = float(best.fun)
    v_max_oracle = max(T(fresh.c_minus), T(fresh.c_plus))
    errs = (abs(w.v_min - v_min_oracle), abs(w.v_max - v_max_oracle), abs(w.v_0I - 2 / 3))
    ok = (errs[0] < 1e-6 and errs[1] < 1e-6 and errs[2] < 1e-10 and w.v_min < w.v_max
          and abs(w.c_at_v_min - 0.5) < 1e-3 and elapsed < 5.0)
    assert record(1, "velocity window", ok,
                  f"v_min={w.v_min:.10f} (oracle err {errs[0]:.1e}), v_max={w.v_max:.10f} "
                  f"(err {errs[1]:.1e}), v_0I err {errs[2]:.1e}, c_at_v_min={w.c_at_v_min:.6f}, "
                  f"{elapsed:.2f}s")


def test_ac02_sweep_monotone(sweep):
    curve, elapsed = sweep
    k = curve.kappa
    strict = bool(np.all(np.diff(k) < 0))
    worst = float(np.max(np.diff(k) / k[:-1]))  # > 0 would be an inversion
    ratio = k[0] / k[-1]
    ok = len(k) == 50 and strict and worst <= 1e-10 and ratio > 1e2 and elapsed < 120
    assert record(2, "kappa(v) strictly decreasing", ok,
                  f"50 points, max relative step {worst:.3e}, kappa ratio {ratio:.1f}, {elapsed:.1f}s")


def test_ac03_limits(model, win):
    small = find_v_for_kappa(model, 1e-4).v
    large = find_v_for_kappa(model, 1e4).v
    e_small = abs(small - win.v_max) / win.width
    e_large = abs(large - win.v_min) / win.width
    ok = e_small < 1e-3 and e_large < 1e-2
    assert record(3, "kappa limits", ok,
                  f"|v(1e-4)-v_max|/W={e_small:.2e} (<1e-3), |v(1e4)-v_min|/W={e_large:.2e} (<1e-2)")


def test_ac04_single_sign_change(model, win):
    kappas = np.logspace(-4, 4, 60)
    changes = []
    for frac in (0.1, 0.3, 0.5, 0.7, 0.9):
        v = win.v_min + frac * win.width
        signs = np.sign([connection_mismatch(model, v, k) for k in kappas])
        changes.append(int(np.count_nonzero(signs[1:] != signs[:-1])))
    ok = changes == [1] * 5
    assert record(4, "mismatch sign changes once", ok, f"changes per velocity {changes} over kappa in [1e-4, 1e4]")


def test_ac05_rh_and_compatibility(model, win, sweep):
    worst_rh, violations, checked = 0.0, 0, 0
    for kappa in (1e-3, 0.05, 0.1, 1.0, 2.0, 10.0, 1e3):
        seq = solve_riemann(model, kappa)
        lo, v, hi = seq.speed_chain()
        (s_m, c_m), (s_p, c_p) = seq.shock.u_minus, seq.shock.u_plus
        worst_rh = max(worst_rh, *map(abs, seq.shock.rh_residuals))
        inside = win.v_min < v < win.v_max
        strict = model.flux.ds(s_m, c_m) < v < model.flux.ds(s_p, c_p)
        weak = model.flux.ds(s_m, c_m) <= v <= model.flux.ds(s_p, c_p)
        violations += int(not (lo <= v <= hi) or not weak or (inside and not strict))
        checked += 1
    for p in sweep[0].samples:
        worst_rh = max(worst_rh, p.rh_residual)
        fs_m = model.flux.ds(p.s_minus, model.c_minus)
        fs_p = model.flux.ds(p.s_plus, model.c_plus)
        violations += int(not fs_m < p.v < fs_p)
        checked += 1
    ok = worst_rh < 1e-8 and violations == 0
    assert record(5, "RH and undercompressive compatibility", ok,
                  f"{checked} shocks, max RH residual {worst_rh:.1e}, violations {violations}")


def test_ac06_slope_monotonicity(model, win):
    rng = np.random.default_rng(20240601)
    report = []
    total_bad = 0
    for kind in (SystemKind.NONEQ, SystemKind.DIFF):
        n, bad = 0, 0
        while n < 1000:
            s, c = rng.uniform(0.01, 0.99), rng.uniform(0.01, 0.99)
            v = win.v_min + rng.uniform(0.0, 1.0) * win.width
            kappa = 10 ** rng.uniform(-3, 3)
            base = TravellingWaveSystem(model, v, kappa, kind).slope(s, c)
            if not base > 0:
                continue
            n += 1
            k_up = TravellingWaveSystem(model, v, kappa * (1 + rng.uniform(0.01, 1.0)), kind).slope(s, c)
            v_up = TravellingWaveSystem(model, v + rng.uniform(1e-4, 1e-2), kappa, kind).slope(s, c)
            bad += int(not (k_up > base and v_up > base))
        report.append(f"{kind.value}: {bad}/{n}")
        total_bad += bad
    assert record(6, "slope increases with kappa and v", total_bad == 0, ", ".join(report) + " violations")


def test_ac07_connection_shape(model, win, sweep):
    min_slope = min(p.min_slope for p in sweep[0].samples)
    worst = 0.0
    for frac in (0.1, 0.3, 0.5, 0.7, 0.9):
        v = win.v_min + frac * win.width
        mid = find_kappa_for_v(model, v, c0=0.5).kappa
        quarter = find_kappa_for_v(model, v, c0=model.c_plus + 0.25 * (model.c_minus - model.c_plus)).kappa
        worst = max(worst, abs(mid - quarter) / mid)
    ok = min_slope > 0 and worst < 1e-8
    assert record(7, "ds/dc > 0 and c0-independence", ok,
                  f"min ds/dc over sweep {min_slope:.3e}, max relative kappa change {worst:.1e}")


def test_ac08_integral_identity(sweep):
    worst = max(abs(p.integral_residual) for p in sweep[0].samples)
    assert record(8, "integral identity", worst < 1e-6, f"max residual {worst:.1e} over 50 samples")


def test_ac09_portrait_evolution(model, win):
    vs = np.linspace(win.v_max / 200, win.v_max + 0.05, 200)
    types = portrait_sequence(model, vs)
    seen = list(dict.fromkeys(t.value for t in types))
    ok = sequence_is_ordered(types) and PortraitType.TYPEIII not in types
    assert record(9, "portrait order", ok, " -> ".join(seen))


def test_ac10_lax_baseline(model):
    lax = solve_lax_baseline(model)
    bl = solve_scalar_riemann(model.flux, model.c_plus, 1.0, 0.0)
    xi = np.linspace(-0.2, 1.6, 1000)
    keep = np.ones_like(xi, bool)
    for x0 in lax.discontinuities() + [el.speed for el in bl.elements if el.kind == "shock"]:
        keep &= np.abs(xi - x0) > 1e-3
    to_bl = float(np.max(np.abs(sample_profile(lax, xi[keep]).s - bl.state(xi[keep]))))
    near = profile_distance(solve_riemann(model, 1e-3), lax, xi)
    ok = to_bl < 1e-6 and near < 0.02
    assert record(10, "Lax baseline", ok, f"baseline vs Buckley-Leverett {to_bl:.1e}, kappa=1e-3 vs baseline {near:.1e}")


@pytest.mark.slow
@pytest.mark.parametrize("kappa", [0.1, 2.0])
def test_ac11_pde_cross_check(model, kappa):
    predicted = find_v_for_kappa(model, kappa).v
    t0 = time.perf_counter()
    run = simulate(model, SimConfig.for_kappa(kappa, eps_c=2e-3, cells=4000))
    est = measure_front_speed(run)
    elapsed = time.perf_counter() - t0
    rel = (est.speed - predicted) / predicted
    ok = abs(rel) < 0.02 and elapsed < 300
    assert record(11, f"PDE front speed, kappa={kappa}", ok,
                  f"measured {est.speed:.6f} vs {predicted:.6f} ({rel:+.3%}), {run.steps} steps, {elapsed:.1f}s")


class _EnvelopeFlux:
    def __init__(self, env):
        self.env = env

    def __call__(self, s, c):
        return self.env.value(s)

    def ds(self, s, c):
        return self.env.slope(s)


def test_ac12_scalar_properties():
    flux = boomerang_model(tilt=0.3).flux
    rng = np.random.default_rng(7)
    bad = {"idempotence": 0, "oleinik": 0, "speeds": 0}
    for _ in range(100):
        sL, sR, c = rng.uniform(0, 1, 3)
        lo, hi, upper = min(sL, sR), max(sL, sR), sL > sR
        fan = solve_scalar_riemann(flux, c, sL, sR)
        sp = fan.speeds()
        bad["speeds"] += int(any(b < a - 1e-12 for a, b in zip(sp, sp[1:])))
        env = upper_concave_envelope(flux, c, lo, hi, upper=upper)
        sign = 1.0 if upper else -1.0
        for seg in env.chords:
            s = np.linspace(seg.a, seg.b, 1001)
            bad["oleinik"] += int(np.any(sign * (flux(s, c) - env.value(s)) > 1e-10))
        again = upper_concave_envelope(_EnvelopeFlux(env), c, lo, hi, grid_n=1024, upper=upper)
        s = np.linspace(lo, hi, 513)
        bad["idempotence"] += int(np.max(np.abs(again.value(s) - env.value(s))) > 1e-12)
    assert record(12, "scalar hull and fans", sum(bad.values()) == 0,
                  f"100 triples, violations {bad}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
