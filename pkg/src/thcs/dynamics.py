"""Vorticity/density right-hand sides and the integrating-factor Heun scheme.

The model, with psi = lap^{-1} omega and J(a, b) = a_x b_z - a_z b_x:

    omega_t = -J(omega, psi) + rho_x + nu lap omega + f
    rho_t   = -J(rho, psi) - N^2 psi_x + (nu / Pr) lap rho

Diffusion is integrated exactly per mode; everything else is advanced
explicitly with Heun's method under the integrating factor.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .diagnostics import DiagnosticsRecord, record
from .forcing import ForcingSpec
from .model import ModelParams, State
from .spectral import GridMismatchError, SpectralField, WaveGrid, fft2, ifft2

logger = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    """Non-finite coefficients appeared; ``time`` is when it was detected."""

    def __init__(self, time: float, records=None, state=None):
        super().__init__(f"simulation diverged at t={time:.17g}")
        self.time = time
        self.records = list(records or [])
        self.state = state


@dataclass(frozen=True)
class StepControl:
    """Time-step policy.

    With ``dt=None`` the step is set once from the initial state by the
    advective CFL bound ``cfl_safety * h / max(|u|, |w|, max_velocity_floor)``.
    """

    dt: float | None = None
    cfl_safety: float = 0.5
    max_velocity_floor: float = 0.1

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if not self.max_velocity_floor > 0:
            raise ValueError("max_velocity_floor must be positive")


def max_velocity(state: State) -> float:
    grid = state.grid
    psi = state.omega.coefficients * grid.inverse_laplacian_symbol
    u, w = ifft2(np.stack([grid.ikz * psi, -grid.ikx * psi])).real
    return float(max(np.max(np.abs(u)), np.max(np.abs(w))))


def cfl_dt(state: State, ctrl: StepControl) -> float:
    vmax = max(max_velocity(state), ctrl.max_velocity_floor)
    return ctrl.cfl_safety * state.grid.spacing / vmax


def resolve_dt(state: State, ctrl: StepControl) -> float:
    return float(ctrl.dt) if ctrl.dt is not None else cfl_dt(state, ctrl)


def _check(state: State, params: ModelParams, f: SpectralField | None = None):
    state.check_grid(params)
    if f is not None and f.grid != params.grid:
        raise GridMismatchError("forcing grid differs from params grid")


def _explicit_terms(grid: WaveGrid, omega: np.ndarray, rho: np.ndarray, n_squared: float,
                    f: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
    """Jacobians, buoyancy coupling and forcing; diffusion excluded."""
    psi = omega * grid.inverse_laplacian_symbol
    ikx, ikz = grid.ikx, grid.ikz
    d = ifft2(np.stack([ikx * omega, ikz * omega, ikx * psi, ikz * psi, ikx * rho, ikz * rho])).real
    wx, wz, px, pz, rx, rz = d
    # overflow is reported by the divergence check, not as a warning
    with np.errstate(over="ignore", invalid="ignore"):
        jac = fft2(np.stack([wx * pz - wz * px, rx * pz - rz * px]))
    mask = grid.mask
    d_omega = np.where(mask, -jac[0] + ikx * rho, 0.0)
    if f is not None:
        d_omega = d_omega + f
    d_rho = np.where(mask, -jac[1] - n_squared * (ikx * psi), 0.0)
    return d_omega, d_rho


def vorticity_rhs(state: State, params: ModelParams, f: SpectralField | None = None) -> SpectralField:
    _check(state, params, f)
    grid = params.grid
    d_omega, _ = _explicit_terms(grid, state.omega.coefficients, state.rho.coefficients,
                                 params.n_squared, None if f is None else f.coefficients)
    return SpectralField(grid, d_omega + params.nu * grid.laplacian_symbol * state.omega.coefficients)


def density_rhs(state: State, params: ModelParams) -> SpectralField:
    _check(state, params)
    grid = params.grid
    _, d_rho = _explicit_terms(grid, state.omega.coefficients, state.rho.coefficients,
                               params.n_squared, None)
    return SpectralField(grid, d_rho + params.kappa * grid.laplacian_symbol * state.rho.coefficients)


@lru_cache(maxsize=64)
def _propagators(resolution: int, nu: float, kappa: float, dt: float):
    from .spectral import grid_for

    lap = grid_for(resolution).laplacian_symbol
    e_omega = np.exp(nu * lap * dt)
    e_rho = np.exp(kappa * lap * dt)
    e_omega.setflags(write=False)
    e_rho.setflags(write=False)
    return e_omega, e_rho


def _forcing_coeffs(forcing: ForcingSpec | None, t: float) -> np.ndarray | None:
    if forcing is None or not forcing.components:
        return None
    return forcing.coefficients_at(t)


def _step_arrays(omega, rho, t, dt, params: ModelParams, forcing: ForcingSpec | None):
    grid = params.grid
    e_w, e_r = _propagators(grid.n, params.nu, params.kappa, dt)
    a_w, a_r = _explicit_terms(grid, omega, rho, params.n_squared, _forcing_coeffs(forcing, t))
    w1 = e_w * (omega + dt * a_w)
    r1 = e_r * (rho + dt * a_r)
    b_w, b_r = _explicit_terms(grid, w1, r1, params.n_squared, _forcing_coeffs(forcing, t + dt))
    half = 0.5 * dt
    w_new = e_w * (omega + half * a_w) + half * b_w
    r_new = e_r * (rho + half * a_r) + half * b_r
    w_new = np.where(grid.mask, w_new, 0.0)
    r_new = np.where(grid.mask, r_new, 0.0)
    return w_new, r_new


def _finite(*arrays) -> bool:
    return all(np.all(np.isfinite(a)) for a in arrays)


def step(state: State, params: ModelParams, forcing: ForcingSpec | None, ctrl: StepControl) -> State:
    """Advance one step of size ``ctrl.dt`` (CFL-derived when unset)."""
    if forcing is not None and forcing.grid not in (None, params.grid):
        raise GridMismatchError("forcing grid differs from params grid")
    _check(state, params)
    dt = resolve_dt(state, ctrl)
    w, r = _step_arrays(state.omega.coefficients, state.rho.coefficients, state.time, dt,
                        params, forcing)
    t_new = state.time + dt
    if not _finite(w, r):
        raise DivergenceError(t_new, state=state)
    return State(SpectralField(params.grid, w), SpectralField(params.grid, r), t_new)


@dataclass
class Trajectory:
    records: list[DiagnosticsRecord]
    final: State
    dt: float
    steps: int
    snapshots: list[State] = field(default_factory=list)


def step_count(span: float, dt: float) -> int:
    return max(1, math.ceil(span / dt - 1e-9))


def iterate(initial: State, params: ModelParams, forcing: ForcingSpec | None, dt: float,
            n_steps: int):
    """Yield ``(i, omega, rho, t)`` for ``i = 1..n_steps`` with uniform step ``dt``.

    Times are ``initial.time + i * dt`` so two runs with equal inputs share
    bit-identical clocks.
    """
    if forcing is not None and forcing.grid not in (None, params.grid):
        raise GridMismatchError("forcing grid differs from params grid")
    initial.check_grid(params)
    w, r = initial.omega.coefficients, initial.rho.coefficients
    t0 = initial.time
    t = t0
    for i in range(1, n_steps + 1):
        w, r = _step_arrays(w, r, t, dt, params, forcing)
        t = t0 + i * dt
        if not _finite(w, r):
            raise DivergenceError(t)
        yield i, w, r, t


def simulate(
    initial: State,
    params: ModelParams,
    forcing: ForcingSpec | None,
    ctrl: StepControl,
    t_end: float,
    sample_every: int = 1,
    snapshot_every: int | None = None,
    on_record: Callable[[DiagnosticsRecord], None] | None = None,
) -> Trajectory:
    """Integrate from ``initial.time`` to ``t_end``.

    The step is shrunk to ``(t_end - t0) / ceil((t_end - t0) / dt)`` so the
    run lands on ``t_end`` with a uniform clock. Diagnostics are recorded at
    the start, every ``sample_every`` steps, and at ``t_end``. On divergence
    the records gathered so far travel with the raised ``DivergenceError``.
    """
    if not t_end > initial.time:
        raise ValueError(f"t_end={t_end} must exceed the initial time {initial.time}")
    if sample_every < 1:
        raise ValueError("sample_every must be a positive integer")
    span = t_end - initial.time
    n_steps = step_count(span, resolve_dt(initial, ctrl))
    dt = span / n_steps
    records: list[DiagnosticsRecord] = []
    snapshots: list[State] = []

    def keep(rec):
        records.append(rec)
        if on_record is not None:
            on_record(rec)

    keep(record(initial, params))
    state = initial
    try:
        for i, w, r, t in iterate(initial, params, forcing, dt, n_steps):
            if i == n_steps:
                t = t_end
            sampled = i % sample_every == 0 or i == n_steps
            snap = snapshot_every is not None and i % snapshot_every == 0
            if sampled or snap or i == n_steps:
                state = State(SpectralField(params.grid, w), SpectralField(params.grid, r), t)
            if sampled:
                keep(record(state, params))
            if snap:
                snapshots.append(state)
    except DivergenceError as err:
        logger.warning("divergence at t=%.6g after %d records", err.time, len(records))
        raise DivergenceError(err.time, records) from None
    return Trajectory(records, state, dt, n_steps, snapshots)
