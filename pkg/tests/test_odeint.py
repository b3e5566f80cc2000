import math

import numpy as np
import pytest

from chemflood.errors import StiffnessError
from chemflood.odeint import dopri, integrate, radau


def test_exponential_decay():
    sol = dopri(lambda t, y: -y, 0.0, 1.0, 2.0, rtol=1e-12, atol=1e-14)
    assert sol.y_final == pytest.approx(math.exp(-2.0), rel=1e-11)
    # dense output between steps
    assert float(sol(0.7)) == pytest.approx(math.exp(-0.7), rel=1e-9)


def test_backward_vector_rotation():
    rhs = lambda t, y: np.array([-y[1], y[0]])
    sol = dopri(rhs, 0.0, np.array([1.0, 0.0]), -math.pi / 2, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(sol.y_final, [0.0, -1.0], atol=1e-10)


def test_event_location():
    # y = 1 - t^2 / 2 crosses 0.5 at t = 1
    sol = dopri(lambda t, y: -t, 0.0, 1.0, 5.0, rtol=1e-12, atol=1e-14, events=[lambda t, y: y - 0.5])
    assert sol.event is not None
    assert sol.t_final == pytest.approx(1.0, abs=1e-10)
    assert sol.y_final == pytest.approx(0.5, abs=1e-10)


def test_zero_span():
    sol = dopri(lambda t, y: y, 1.0, 3.0, 1.0)
    assert sol.y_final == 3.0


def test_stiff_budget_raises_and_falls_back():
    rhs = lambda t, y: -1e6 * (y - math.cos(t))
    with pytest.raises(StiffnessError):
        dopri(rhs, 0.0, 0.0, 10.0, rtol=1e-8, atol=1e-10, max_steps=2000)
    sol = integrate(rhs, 0.0, 0.0, 10.0, rtol=1e-8, atol=1e-10, max_steps=2000)
    assert sol.method == "radau"
    assert sol.y_final == pytest.approx(math.cos(10.0), abs=1e-5)


def test_radau_matches_dopri():
    rhs = lambda t, y: np.array([y[1], -y[0] - 0.1 * y[1]])
    y0 = np.array([1.0, 0.0])
    a = dopri(rhs, 0.0, y0, 5.0, 1e-11, 1e-13)
    b = radau(rhs, 0.0, y0, 5.0, 1e-11, 1e-13)
    np.testing.assert_allclose(a.y_final, b.y_final, atol=1e-8)
