import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from chemflood.errors import DomainError
from chemflood.models import boomerang_model
from chemflood.scalar import edge_speed, fan_rows, solve_scalar_riemann, upper_concave_envelope

FLUX = boomerang_model(tilt=0.3).flux
WELGE = 1 / np.sqrt(2)  # f_s(s, 0) = f(s, 0)/s for f = s^2/(s^2 + (1-s)^2)


class EnvelopeFlux:
    """An envelope seen as a flux function, to take its envelope again."""

    def __init__(self, env):
        self.env = env

    def __call__(self, s, c):
        return self.env.value(s)

    def ds(self, s, c):
        return self.env.slope(s)


def test_concave_piece_has_no_chord():
    env = upper_concave_envelope(FLUX, 0.0, 0.8, 1.0)
    assert env.chords == []


def test_convex_piece_is_one_chord():
    env = upper_concave_envelope(FLUX, 0.0, 0.0, 0.2)
    assert len(env.segments) == 1 and env.segments[0].kind == "chord"


def test_welge_tangent():
    flux = boomerang_model().flux
    env = upper_concave_envelope(flux, 0.0, 0.0, 1.0)
    assert [seg.kind for seg in env.segments] == ["chord", "f"]
    assert env.segments[0].b == pytest.approx(WELGE, abs=1e-12)
    # independent root of the tangency condition
    tangency = brentq(lambda s: flux.ds(s, 0.0) * s - flux(s, 0.0), 0.55, 0.99, xtol=1e-15)
    assert env.segments[0].b == pytest.approx(tangency, abs=1e-12)


def test_fan_examples():
    flux = boomerang_model().flux
    raref = solve_scalar_riemann(flux, 0.0, 1.0, WELGE)
    assert [el.kind for el in raref.elements] == ["rarefaction"]
    assert edge_speed(raref, "initial") == pytest.approx(0.0, abs=1e-14)
    assert edge_speed(raref, "final") == pytest.approx(float(flux.ds(WELGE, 0.0)), abs=1e-12)
    shock = solve_scalar_riemann(flux, 0.0, WELGE, 0.0)
    assert [el.kind for el in shock.elements] == ["shock"]
    assert edge_speed(shock, "initial") == edge_speed(shock, "final")
    assert shock.v_final == pytest.approx(flux(WELGE, 0.0) / WELGE, abs=1e-12)
    full = solve_scalar_riemann(flux, 0.0, 1.0, 0.0)
    assert [el.kind for el in full.elements] == ["rarefaction", "shock"]
    assert full.v_final == pytest.approx(1.2071067811865477, abs=1e-10)
    assert full.v_initial == pytest.approx(0.0, abs=1e-14)


def test_empty_fan():
    fan = solve_scalar_riemann(FLUX, 0.4, 0.3, 0.3)
    assert fan.empty and fan.v_initial is None
    with pytest.raises(DomainError):
        edge_speed(fan)
    with pytest.raises(DomainError):
        edge_speed(solve_scalar_riemann(FLUX, 0.4, 0.6, 0.3), "middle")


def test_fan_state_limits():
    fan = solve_scalar_riemann(FLUX, 0.2, 1.0, 0.0)
    assert fan.state(-1.0) == 1.0 and fan.state(10.0) == 0.0
    rows = fan_rows(fan, 50)
    s = np.array([r[1] for r in rows])
    assert np.all(np.diff(s) <= 0)


def test_refinement_moves_breakpoints_little():
    coarse = upper_concave_envelope(FLUX, 0.6, 0.0, 1.0, grid_n=1024)
    fine = upper_concave_envelope(FLUX, 0.6, 0.0, 1.0, grid_n=2048)
    assert np.max(np.abs(coarse.breakpoints - fine.breakpoints)) < 1 / 1023


triples = st.tuples(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0)).filter(
    lambda t: abs(t[0] - t[1]) > 1e-3)


@settings(max_examples=100, deadline=None, derandomize=True)
@given(triples)
def test_scalar_properties(triple):
    sL, sR, c = triple
    fan = solve_scalar_riemann(FLUX, c, sL, sR)
    speeds = fan.speeds()
    assert all(b >= a - 1e-12 for a, b in zip(speeds, speeds[1:]))
    upper = sL > sR
    lo, hi = min(sL, sR), max(sL, sR)
    env = upper_concave_envelope(FLUX, c, lo, hi, upper=upper)
    sign = 1.0 if upper else -1.0
    for seg in env.chords:
        s = np.linspace(seg.a, seg.b, 401)
        assert np.all(sign * (FLUX(s, c) - env.value(s)) <= 1e-10)
    again = upper_concave_envelope(EnvelopeFlux(env), c, lo, hi, grid_n=1024, upper=upper)
    s = np.linspace(lo, hi, 257)
    assert np.max(np.abs(again.value(s) - env.value(s))) < 1e-12
