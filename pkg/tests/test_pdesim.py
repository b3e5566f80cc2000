import numpy as np
import pytest

from chemflood.connect import find_v_for_kappa
from chemflood.errors import DomainError, InconclusiveRunError, InstabilityError
from chemflood.pdesim import (
    GridState,
    SimConfig,
    Simulator,
    cell_centres,
    front_position,
    initial_state,
    measure_front_speed,
    simulate,
    snapshot_rows,
    uniform_state,
)
from chemflood.riemann import verify_travelling_profile


def test_config_guards():
    with pytest.raises(DomainError):
        SimConfig(eps_d=1e-3, eps_r=1e-3)
    SimConfig(eps_d=1e-3, eps_r=1e-3, three_parameter=True)
    with pytest.raises(DomainError):
        SimConfig(cfl=0.8)
    with pytest.raises(DomainError):
        SimConfig(eps_c=-1.0)
    noneq = SimConfig.for_kappa(2.0, "noneq", eps_c=1e-3)
    diff = SimConfig.for_kappa(2.0, "diff", eps_c=1e-3)
    assert (noneq.eps_r, noneq.eps_d) == (2e-3, 0.0)
    assert (diff.eps_r, diff.eps_d) == (0.0, 2e-3)


@pytest.mark.parametrize("eps_r", [0.0, 1e-3])
def test_uniform_state_is_fixed(boomerang, eps_r):
    cfg = SimConfig(eps_c=1e-2, eps_r=eps_r, cells=64)
    state = uniform_state(cfg, boomerang, 0.4, 0.3)
    new = Simulator(cfg, boomerang, inflow=(0.4, 0.3)).step(state)
    np.testing.assert_allclose(new.s, state.s, rtol=0, atol=1e-15)
    np.testing.assert_allclose(new.c, state.c, rtol=0, atol=1e-14)
    np.testing.assert_allclose(new.alpha, state.alpha, rtol=0, atol=1e-15)


def test_zero_dissipation_is_upwind(boomerang):
    cfg = SimConfig(eps_c=0.0, cells=50)
    rng = np.random.default_rng(3)
    s = rng.uniform(0, 1, cfg.cells)
    c = np.full(cfg.cells, 0.4)
    state = GridState(s, c, np.full(cfg.cells, float(boomerang.adsorption(0.4))))
    sim = Simulator(cfg, boomerang, inflow=(1.0, 0.4))
    new = sim.step(state)
    f = boomerang.flux(np.concatenate([[1.0], s]), 0.4)
    expected = s - sim.dt / cfg.dx * (f[1:] - f[:-1])
    np.testing.assert_allclose(new.s, expected, rtol=0, atol=1e-15)
    np.testing.assert_allclose(new.c, 0.4, rtol=0, atol=1e-13)


def test_conservation(boomerang):
    cfg = SimConfig.for_kappa(1.0, eps_c=1e-2, cells=200)
    sim = Simulator(cfg, boomerang)
    state = initial_state(cfg, boomerang)
    for _ in range(200):
        state = sim.step(state)
    fs, fm = sim.fluxes(state)
    new = sim.step(state)
    mass_s = (new.s.sum() - state.s.sum()) * cfg.dx
    mass_m = ((new.c * new.s + new.alpha).sum() - (state.c * state.s + state.alpha).sum()) * cfg.dx
    assert abs(mass_s + sim.dt * (fs[-1] - fs[0])) < 1e-12
    assert abs(mass_m + sim.dt * (fm[-1] - fm[0])) < 1e-12


def test_relaxation_consistency(boomerang):
    base = dict(eps_c=1e-2, cells=200, t_end=0.3)
    eq = simulate(boomerang, SimConfig(**base)).final
    fast = simulate(boomerang, SimConfig(eps_r=1e-5, **base)).final
    assert np.max(np.abs(fast.alpha - boomerang.adsorption(fast.c))) < 1e-3
    assert np.max(np.abs(fast.c - eq.c)) < 1e-2


def test_instability_reported(boomerang):
    cfg = SimConfig(cells=16)
    state = uniform_state(cfg, boomerang, 0.5, 0.5)
    state.s[3] = np.nan
    with pytest.raises(InstabilityError, match="dt"):
        Simulator(cfg, boomerang).step(state)


def test_front_leaving_domain_is_inconclusive(boomerang):
    run = simulate(boomerang, SimConfig.for_kappa(1.0, eps_c=1e-2, cells=100, t_end=2.0))
    with pytest.raises(InconclusiveRunError):
        measure_front_speed(run)


def test_snapshots_and_rows(boomerang):
    cfg = SimConfig.for_kappa(1.0, eps_c=1e-2, cells=100, t_end=0.2)
    run = simulate(boomerang, cfg, snapshot_times=[0.1, 5.0])
    assert len(run.snapshots) == 2
    rows = snapshot_rows(run.final, cfg)
    assert len(rows) == cfg.cells and rows[0][0] == pytest.approx(cell_centres(cfg)[0])


@pytest.fixture(scope="module")
def coarse_runs(boomerang):
    v_pred = find_v_for_kappa(boomerang, 1.0).v
    speeds = {}
    for cells, eps in ((400, 1e-2), (800, 1e-2), (800, 5e-3)):
        run = simulate(boomerang, SimConfig.for_kappa(1.0, eps_c=eps, cells=cells))
        speeds[cells, eps] = measure_front_speed(run).speed
    return v_pred, speeds


def test_front_speed_matches_connection(coarse_runs):
    v_pred, speeds = coarse_runs
    assert abs(speeds[400, 1e-2] - v_pred) < 0.01 * v_pred


def test_grid_refinement_reduces_error(coarse_runs):
    v_pred, speeds = coarse_runs
    assert abs(speeds[800, 1e-2] - v_pred) < abs(speeds[400, 1e-2] - v_pred)


def test_halving_eps_changes_speed_little(coarse_runs):
    # same cells per dissipation length: only the vanishing-viscosity scale changes
    v_pred, speeds = coarse_runs
    assert abs(speeds[800, 5e-3] - speeds[400, 1e-2]) < 5e-3 * v_pred


def test_profile_overlay(boomerang):
    # about 16 cells per eps_c * kappa; the upwind error in c halves with each doubling of cells
    conn = find_v_for_kappa(boomerang, 1.0)
    wave = verify_travelling_profile(boomerang, conn)
    cfg = SimConfig.for_kappa(1.0, eps_c=2e-2, cells=800)
    run = simulate(boomerang, cfg)
    x_front = front_position(run.final, cfg, 0.5 * (boomerang.c_minus + boomerang.c_plus))
    near = np.abs(wave.xi) <= 10
    x = x_front + cfg.eps_c * wave.xi[near]
    s_err = np.max(np.abs(np.interp(x, cell_centres(cfg), run.final.s) - wave.s[near]))
    c_err = np.max(np.abs(np.interp(x, cell_centres(cfg), run.final.c) - wave.c[near]))
    assert s_err < 0.03 and c_err < 0.03
