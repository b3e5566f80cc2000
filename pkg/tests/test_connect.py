import numpy as np
import pytest

from chemflood.connect import (
    connection_mismatch,
    find_kappa_for_v,
    find_v_for_kappa,
    integral_identity,
    kappa_crit,
    launch_manifold,
    sweep_curve,
    sweep_grid,
)
from chemflood.errors import DomainError
from chemflood.odeint import dopri
from chemflood.twave import SystemKind, TravellingWaveSystem, critical_points, find_point, velocity_window

# kappa(v_min + frac * width), frozen from the solver at default tolerances
KAPPA_AT = {0.1: 9.609433, 0.5: 1.365463, 0.9: 0.324868, 0.99: 0.092478}


def speed(window, frac):
    return window.v_min + frac * window.width


@pytest.fixture(scope="module")
def mid_connection(boomerang, window):
    return find_kappa_for_v(boomerang, speed(window, 0.5))


@pytest.mark.parametrize("frac", sorted(KAPPA_AT))
def test_kappa_values(boomerang, window, frac):
    res = find_kappa_for_v(boomerang, speed(window, frac))
    assert res.kappa == pytest.approx(KAPPA_AT[frac], rel=1e-6)


def test_connection_properties(mid_connection):
    res = mid_connection
    assert max(abs(r) for r in res.rh) < 1e-12
    assert np.all(res.slopes() > 0)
    c, s = res.samples()
    assert np.all(np.diff(s) * np.diff(c) >= 0)
    assert res.minus.offset_discrepancy < 1e-8 and res.plus.offset_discrepancy < 1e-8
    lhs, rhs, resid = integral_identity(res)
    assert abs(resid) < 1e-8
    assert lhs == pytest.approx(res.s_minus - res.s_plus)


def test_mismatch_signs(boomerang, window, mid_connection):
    v, k = mid_connection.v, mid_connection.kappa
    assert connection_mismatch(boomerang, v, 10 * k) < 0
    assert connection_mismatch(boomerang, v, k / 10) > 0


def test_c0_independence(boomerang, mid_connection):
    other = find_kappa_for_v(boomerang, mid_connection.v, c0=0.25)
    assert abs(other.kappa - mid_connection.kappa) < 1e-8 * mid_connection.kappa


def test_mismatch_c0_domain(boomerang, window):
    with pytest.raises(DomainError):
        connection_mismatch(boomerang, speed(window, 0.5), 1.0, c0=1.0)


def test_outside_window(boomerang, window):
    with pytest.raises(DomainError):
        find_kappa_for_v(boomerang, window.v_max + 1e-3)
    with pytest.raises(DomainError):
        find_v_for_kappa(boomerang, -1.0)


def test_type_i_manifold_misses_lower_saddle(boomerang):
    # without a gap the branch from u2_minus stays on the upper black curve and lands at u2_plus
    sys = TravellingWaveSystem(boomerang, 0.68, 1.0)
    pts = critical_points(sys)
    traj = launch_manifold(sys, find_point(pts, "u2_minus"))
    assert traj.termination == "reached_c_target"
    assert abs(traj.s_end - find_point(pts, "u2_plus").s) < 0.01
    assert traj.s_end - find_point(pts, "u1_plus").s > 0.2


def test_large_kappa_crosses_gap_steeply(boomerang, window):
    v = speed(window, 0.5)
    sys = TravellingWaveSystem(boomerang, v, 1e3)
    um = find_point(critical_points(sys), "u2_minus")
    traj = launch_manifold(sys, um, c_target=0.5)
    assert traj.termination == "hit_s0"


def test_manifold_flow_reversal(boomerang, mid_connection):
    sys = mid_connection.system
    um = find_point(critical_points(sys), "u2_minus")
    traj = launch_manifold(sys, um, c_target=0.5)
    c_j, s_j = traj.junction
    back = dopri(lambda c, s: sys.slope(s, c), traj.c_end, traj.s_end, c_j, 1e-12, 1e-14)
    assert abs(back.y_final - s_j) < 1e-8


def test_monotone_in_v(boomerang, window):
    k1 = find_kappa_for_v(boomerang, speed(window, 1e-3)).kappa
    k2 = find_kappa_for_v(boomerang, speed(window, 1e-1)).kappa
    assert k1 > k2


def test_v_for_kappa(boomerang):
    v01 = find_v_for_kappa(boomerang, 0.1).v
    v2 = find_v_for_kappa(boomerang, 2.0).v
    assert v01 == pytest.approx(0.72376494, abs=1e-7)
    assert v2 == pytest.approx(0.70847283, abs=1e-7)
    assert v2 < v01


def test_diff_kind_is_monotone_but_different(boomerang, window):
    vs = [speed(window, f) for f in (0.2, 0.5, 0.8)]
    noneq = [find_kappa_for_v(boomerang, v, SystemKind.NONEQ).kappa for v in vs]
    diff = [find_kappa_for_v(boomerang, v, SystemKind.DIFF).kappa for v in vs]
    assert diff[0] > diff[1] > diff[2]
    assert not np.allclose(noneq, diff, rtol=1e-3)


def test_kappa_crit_tilted(tilted):
    w = velocity_window(tilted)
    kc = kappa_crit(tilted)
    assert kc == pytest.approx(0.598077, rel=1e-4)
    near = find_kappa_for_v(tilted, w.v_max - 1e-4 * w.width).kappa
    assert near > kc and near - kc < 0.05
    sat = find_v_for_kappa(tilted, 0.5 * kc)
    assert sat.at_window_boundary and sat.v == w.v_max


def test_boomerang_kappa_crit_is_zero(boomerang):
    assert kappa_crit(boomerang) == 0.0


def test_sweep_grid_shares_points(window):
    coarse = sweep_grid(window, 5)
    fine = sweep_grid(window, 11)
    np.testing.assert_allclose(fine[1::2], coarse, rtol=0, atol=1e-15)
    with pytest.raises(DomainError):
        sweep_grid(window, 5, "random")


def test_small_sweep_and_refinement(boomerang):
    coarse = sweep_curve(boomerang, 3)
    fine = sweep_curve(boomerang, 7)
    assert np.all(np.diff(coarse.kappa) < 0)
    np.testing.assert_allclose(fine.kappa[1::2], coarse.kappa, rtol=1e-8)
    assert max(abs(p.integral_residual) for p in fine.samples) < 1e-6
    assert len(coarse.rows()) == 3 and len(coarse.rows()[0]) == 5
