"""Explicit finite-volume simulator for the dissipative flooding system.

Solves on ``[0, L]``

    s_t + f(s, c)_x                = eps_c (A s_x)_x
    (c s + alpha)_t + (c f)_x      = eps_c (c A s_x)_x + eps_d c_xx
    eps_r alpha_t                  = a(c) - alpha      (alpha = a(c) if eps_r = 0)

with first order upwind fluxes (all characteristic speeds are non-negative),
centred diffusion and an implicit exponential update of the relaxation.
The conserved pair ``(s, m = c s + alpha)`` is advanced; ``c`` and
``alpha`` are then recovered cell by cell. The left boundary injects
``(1, c^-)``; the right boundary is a free outflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from chemflood.errors import DomainError, InconclusiveRunError, InstabilityError
from chemflood.models import ModelSet
from chemflood.twave import SystemKind


@dataclass(frozen=True)
class SimConfig:
    """Dissipation parameters and discretization of one run.

    ``t_end=None`` picks a time at which a front moving at the largest
    admissible speed has crossed most of the domain.
    """

    eps_c: float = 2e-3
    eps_d: float = 0.0
    eps_r: float = 0.0
    length: float = 1.0
    cells: int = 4000
    cfl: float = 0.45
    t_end: Optional[float] = None
    x0: float = 0.05  # initial step position as a fraction of the length
    width_cells: float = 5.0
    record_every: int = 50
    three_parameter: bool = False

    def __post_init__(self):
        if min(self.eps_c, self.eps_d, self.eps_r) < 0:
            raise DomainError("dissipation parameters must be non-negative")
        if self.eps_d > 0 and self.eps_r > 0 and not self.three_parameter:
            raise DomainError("eps_d and eps_r both active: enable three_parameter mode explicitly")
        if not 0 < self.cfl <= 0.5:
            raise DomainError(f"CFL must lie in (0, 0.5], got {self.cfl}")
        if self.cells < 8:
            raise DomainError("need at least 8 cells")

    @property
    def dx(self):
        return self.length / self.cells

    @property
    def width(self):
        return self.width_cells * self.dx

    @classmethod
    def for_kappa(cls, kappa: float, kind=SystemKind.NONEQ, eps_c: float = 2e-3, **kw):
        """Configuration with ``eps_r`` (or ``eps_d``) equal to ``kappa * eps_c``."""
        kind = SystemKind(kind)
        if kind is SystemKind.NONEQ:
            return cls(eps_c=eps_c, eps_r=kappa * eps_c, **kw)
        return cls(eps_c=eps_c, eps_d=kappa * eps_c, **kw)


@dataclass
class GridState:
    s: np.ndarray
    c: np.ndarray
    alpha: np.ndarray
    t: float = 0.0

    def copy(self):
        return GridState(self.s.copy(), self.c.copy(), self.alpha.copy(), self.t)


def cell_centres(config: SimConfig):
    return (np.arange(config.cells) + 0.5) * config.dx


def initial_state(config: SimConfig, model: ModelSet) -> GridState:
    """Smoothed Riemann step ``(1, c^-) | (0, c^+)`` at ``x0 * L`` in equilibrium."""
    x = cell_centres(config)
    right = 0.5 * (1.0 + np.tanh((x - config.x0 * config.length) / config.width))
    s = 1.0 - right
    c = model.c_minus + (model.c_plus - model.c_minus) * right
    return GridState(s, c, np.asarray(model.adsorption(c), float) + 0 * c, 0.0)


def uniform_state(config: SimConfig, model: ModelSet, s0: float, c0: float) -> GridState:
    n = config.cells
    return GridState(np.full(n, s0), np.full(n, c0), np.full(n, float(model.adsorption(c0))), 0.0)


class Simulator:
    """Precomputes the step size and boundary data for repeated `step` calls."""

    def __init__(self, config: SimConfig, model: ModelSet, inflow=None):
        self.config = config
        self.model = model
        self.inflow = inflow if inflow is not None else (1.0, model.c_minus)
        s = np.linspace(0.0, 1.0, 201)
        cs = np.linspace(0.0, 1.0, 51)
        S, C = np.meshgrid(s, cs)
        speed = float(np.max(np.asarray(model.flux.ds(S, C))))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(S > 0, np.asarray(model.flux(S, C)) / S, 0.0)
        speed = max(speed, float(np.max(ratio)), 1e-12)
        da_min = float(np.min(np.asarray(model.adsorption.d1(cs)) + 0 * cs))
        diff = max(config.eps_c * model.capillarity.hi, config.eps_d / max(da_min, 1e-12), 1e-300)
        dx = config.dx
        self.max_speed = speed
        self.max_diffusion = diff
        self.dt = config.cfl / (diff / dx**2 + speed / dx)

    def bound(self):
        """The parabolic and advective limits the step was chosen from."""
        dx = self.config.dx
        return {"dt": self.dt, "dt_parabolic": self.config.cfl * dx**2 / self.max_diffusion,
                "dt_advective": self.config.cfl * dx / self.max_speed}

    def fluxes(self, state: GridState):
        """Face fluxes ``(F_s, F_m)`` on the ``N + 1`` faces, including diffusion."""
        cfg, m = self.config, self.model
        s_in, c_in = self.inflow
        s_g = np.concatenate([[s_in], state.s, [state.s[-1]]])
        c_g = np.concatenate([[c_in], state.c, [state.c[-1]]])
        f_g = np.asarray(m.flux(s_g, c_g), float)
        # upwind: every face takes the value of the cell on its left
        adv_s = f_g[:-1]
        adv_m = c_g[:-1] * f_g[:-1]
        grad_s = (s_g[1:] - s_g[:-1]) / cfg.dx
        grad_c = (c_g[1:] - c_g[:-1]) / cfg.dx
        s_face = 0.5 * (s_g[1:] + s_g[:-1])
        c_face = 0.5 * (c_g[1:] + c_g[:-1])
        cap = np.asarray(m.capillarity(s_face, c_face), float) + 0 * s_face
        dif_s = cfg.eps_c * cap * grad_s
        flux_s = adv_s - dif_s
        flux_m = adv_m - c_face * dif_s - cfg.eps_d * grad_c
        return flux_s, flux_m

    def _recover(self, s, m_new, alpha_old, dt, c_guess):
        """Solve ``c s + (1 - E) a(c) + E alpha_old = m`` for ``c``, ``E = exp(-dt/eps_r)``."""
        ads = self.model.adsorption
        E = math.exp(-dt / self.config.eps_r) if self.config.eps_r > 0 else 0.0
        rhs = m_new - E * alpha_old
        c = np.clip(c_guess, 0.0, 1.0)
        for _ in range(8):
            phi = c * s + (1 - E) * ads(c) - rhs
            dphi = s + (1 - E) * ads.d1(c)
            step = phi / np.maximum(dphi, 1e-300)
            c = np.clip(c - step, 0.0, 1.0)
            if np.max(np.abs(step)) < 1e-14:
                break
        alpha = (1 - E) * np.asarray(ads(c), float) + E * alpha_old
        return c, alpha

    def step(self, state: GridState) -> GridState:
        dt, dx = self.dt, self.config.dx
        flux_s, flux_m = self.fluxes(state)
        s_new = state.s - dt / dx * (flux_s[1:] - flux_s[:-1])
        m_old = state.c * state.s + state.alpha
        m_new = m_old - dt / dx * (flux_m[1:] - flux_m[:-1])
        if not (np.all(np.isfinite(s_new)) and np.all(np.isfinite(m_new))):
            b = self.bound()
            raise InstabilityError(
                f"non-finite state at t={state.t:.6g}; dt={b['dt']:.3g} must respect "
                f"dt <= cfl*dx^2/D = {b['dt_parabolic']:.3g} and dt <= cfl*dx/speed = {b['dt_advective']:.3g}")
        c_new, alpha_new = self._recover(s_new, m_new, state.alpha, dt, state.c)
        return GridState(s_new, c_new, alpha_new, state.t + dt)


def step(state: GridState, config: SimConfig, model: ModelSet) -> GridState:
    """Advance one explicit step (builds a `Simulator`; use it directly in loops)."""
    return Simulator(config, model).step(state)


def front_position(state: GridState, config: SimConfig, level: float) -> float:
    """Position of the first downward crossing of ``c = level``; NaN if none."""
    c = state.c
    below = np.flatnonzero(c < level)
    if below.size == 0 or below[0] == 0:
        return math.nan
    i = below[0]
    x = cell_centres(config)
    c0, c1 = c[i - 1], c[i]
    return float(x[i - 1] + (x[i] - x[i - 1]) * (c0 - level) / (c0 - c1))


@dataclass
class SimResult:
    config: SimConfig
    times: np.ndarray
    fronts: np.ndarray
    final: GridState
    snapshots: List[GridState] = field(default_factory=list)
    steps: int = 0
    dt: float = 0.0


def simulate(model: ModelSet, config: SimConfig, snapshot_times=(), state: Optional[GridState] = None,
             t_guess_speed: Optional[float] = None) -> SimResult:
    """Run to ``config.t_end`` recording the c-front position every ``record_every`` steps."""
    sim = Simulator(config, model)
    state = state or initial_state(config, model)
    t_end = config.t_end
    if t_end is None:
        if t_guess_speed is None:
            from chemflood.twave import velocity_window

            t_guess_speed = velocity_window(model).v_max
        t_end = (0.85 - config.x0) * config.length / t_guess_speed
    level = 0.5 * (model.c_minus + model.c_plus)
    times, fronts, snaps = [], [], []
    pending = sorted(snapshot_times)
    n = 0
    while state.t < t_end - 1e-15:
        if n % config.record_every == 0:
            times.append(state.t)
            fronts.append(front_position(state, config, level))
        while pending and state.t >= pending[0]:
            snaps.append(state.copy())
            pending.pop(0)
        state = sim.step(state)
        n += 1
    times.append(state.t)
    fronts.append(front_position(state, config, level))
    snaps.extend(state.copy() for _ in pending)
    return SimResult(config, np.array(times), np.array(fronts), state, snaps, n, sim.dt)


@dataclass(frozen=True)
class SpeedEstimate:
    speed: float
    stderr: float
    window: tuple  # (t_start, t_end) of the fit

    def to_dict(self):
        return {"speed": self.speed, "stderr": self.stderr, "window": list(self.window)}


def measure_front_speed(result: SimResult, fraction: float = 1 / 3, margin_cells: int = 20) -> SpeedEstimate:
    """Least-squares slope of the front position over the final ``fraction`` of the run."""
    t, x = result.times, result.fronts
    cut = t >= t[-1] * (1 - fraction)
    t, x = t[cut], x[cut]
    length = result.config.length
    margin = margin_cells * result.config.dx
    if t.size < 3 or np.any(~np.isfinite(x)) or np.any(x < margin) or np.any(x > length - margin):
        raise InconclusiveRunError("c-front missing or touching the domain boundary during the fit window")
    A = np.vstack([t, np.ones_like(t)]).T
    coef, res, *_ = np.linalg.lstsq(A, x, rcond=None)
    resid = x - A @ coef
    dof = max(t.size - 2, 1)
    sigma2 = float(resid @ resid) / dof
    stderr = math.sqrt(sigma2 / float(np.sum((t - t.mean()) ** 2)))
    return SpeedEstimate(float(coef[0]), stderr, (float(t[0]), float(t[-1])))


def snapshot_rows(state: GridState, config: SimConfig):
    x = cell_centres(config)
    return list(zip(x.tolist(), state.s.tolist(), state.c.tolist(), state.alpha.tolist()))
