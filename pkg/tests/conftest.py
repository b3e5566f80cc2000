import numpy as np
import pytest

from chemflood.models import boomerang_model


@pytest.fixture(scope="session")
def boomerang():
    return boomerang_model()


@pytest.fixture(scope="session")
def tilted():
    # tilt breaks the symmetry of mu so v_max comes from the c = 1 tangent (II-IV scenario)
    return boomerang_model(tilt=0.5)


@pytest.fixture(scope="session")
def window(boomerang):
    from chemflood.twave import velocity_window

    return velocity_window(boomerang)


def dense_tangent_slope(flux, c, d1, n=100_001):
    """max_s f(s, c)/(s + d1) on a uniform grid: the oracle for the tangent speed."""
    s = np.linspace(0.0, 1.0, n)
    return float(np.max(flux(s, np.full_like(s, c)) / (s + d1)))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
