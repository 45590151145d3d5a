"""Unforced decay experiment and the oscillatory-forcing averaging experiment."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .diagnostics import (
    DecayCertificate,
    DecayFit,
    DiagnosticsRecord,
    FitError,
    _workers,
    derive_certificate,
    fit_decay_rate,
    transient_window,
)
from .dynamics import DivergenceError, StepControl, iterate, resolve_dt, simulate, step_count
from .forcing import ForcingSpec, averaged_spec
from .model import ModelParams, State
from .spectral import GridMismatchError, fractional_norm_coeffs

logger = logging.getLogger(__name__)

DECAY_SERIES = ("energy", "h1_psi", "h2_psi", "h3_psi", "l2_rho", "h1_rho")
ENVELOPE_SLACK = 1e-6


def difference_norm(a: State, b: State, params: ModelParams) -> float:
    """||a.omega - b.omega||_{1/2} + ||a.rho - b.rho||_{1/2}, A = -nu Laplacian."""
    if a.grid != b.grid or a.grid != params.grid:
        raise GridMismatchError("states and params must share one grid")
    if a.time != b.time:
        raise ValueError(f"states are at different times: {a.time} vs {b.time}")
    return _diff(params, a.omega.coefficients - b.omega.coefficients,
                 a.rho.coefficients - b.rho.coefficients)


def _diff(params: ModelParams, dw: np.ndarray, dr: np.ndarray) -> float:
    g, nu = params.grid, params.nu
    return fractional_norm_coeffs(g, dw, 0.5, nu) + fractional_norm_coeffs(g, dr, 0.5, nu)


# --------------------------------------------------------------------------
# decay


@dataclass
class DecayExperimentReport:
    config: dict
    certificate: DecayCertificate
    fits: dict[str, DecayFit | None]
    fit_notes: dict[str, str]
    window: tuple[float, float] | None
    envelope_ok: bool
    paper_alpha_ok: bool
    alpha_integral_ok: bool
    envelope_max_ratio: float
    dt: float
    records: list[DiagnosticsRecord] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("records")
        d["certificate"] = self.certificate.to_dict()
        return d


def envelope_checks(records, cert: DecayCertificate):
    t = np.array([r.time for r in records])
    e = np.array([r.energy for r in records])
    d = np.array([r.dissipation for r in records])
    e0 = e[0]
    if e0 == 0.0:
        return True, True, True, 0.0
    t_rel = t - t[0]
    ratio = e / (e0 * np.exp(-cert.beta_rigorous * t_rel))
    envelope_ok = bool(np.all(ratio <= 1 + ENVELOPE_SLACK))
    alpha_ok = bool(np.all(e <= e0 * np.exp(-cert.alpha * t_rel) * (1 + ENVELOPE_SLACK)))
    # alpha form with the dissipation integral added; that integral carries nu, not 2 nu
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (d[1:] + d[:-1]) * np.diff(t))]) / 2
    literal_ok = bool(np.all(e + integral <= e0 * np.exp(-cert.alpha * t_rel) * (1 + ENVELOPE_SLACK)))
    return envelope_ok, alpha_ok, literal_ok, float(ratio.max())


def fit_decay_series(records, names=DECAY_SERIES):
    """Fit each named norm over the post-transient window of the energy."""
    times = np.array([r.time for r in records])
    energy = np.array([r.energy for r in records])
    fits: dict[str, DecayFit | None] = {}
    notes: dict[str, str] = {}
    if energy[0] == 0.0:
        for name in names:
            fits[name] = None
            notes[name] = "degenerate_zero"
        return None, fits, notes
    window = transient_window(times, energy)
    if window is None:
        half = len(times) // 2
        window = (float(times[half]), float(times[-1]))
        notes["window"] = "energy never fell below 1e-2 E(0); fitted last half of the run"
    for name in names:
        values = np.array([getattr(r, name) for r in records])
        sel = (times >= window[0]) & (times <= window[1])
        lo, hi = window
        if np.all(values[sel] == 0.0):
            fits[name] = None
            notes[name] = "degenerate_zero"
            continue
        if np.any(~(values[sel] > 0)):
            bad = times[sel][~(values[sel] > 0)][0]
            hi = float(times[times < bad][-1])
            notes[name] = f"window shortened to t<={hi:.6g}: norm underflowed"
        series = np.column_stack([times, values])
        try:
            fits[name] = fit_decay_rate(series, (lo, hi))
        except FitError as exc:
            fits[name] = None
            notes[name] = f"fit failed: {exc}"
    return window, fits, notes


def run_decay_experiment(params: ModelParams, initial: State, ctrl: StepControl, t_end: float,
                         sample_every: int = 1, config: dict | None = None,
                         on_record=None) -> DecayExperimentReport:
    cert = derive_certificate(params, initial)
    traj = simulate(initial, params, None, ctrl, t_end, sample_every, on_record=on_record)
    window, fits, notes = fit_decay_series(traj.records)
    env_ok, alpha_ok, literal_ok, max_ratio = envelope_checks(traj.records, cert)
    return DecayExperimentReport(
        config=config or {}, certificate=cert, fits=fits, fit_notes=notes, window=window,
        envelope_ok=env_ok, paper_alpha_ok=alpha_ok, alpha_integral_ok=literal_ok,
        envelope_max_ratio=max_ratio, dt=traj.dt, records=traj.records,
    )


# --------------------------------------------------------------------------
# averaging


@dataclass
class AveragingExperimentReport:
    eta_values: list[float]
    sup_errors: list[float]
    horizon_T: float
    fitted_order: float | None
    monotone: bool
    dts: list[float]
    state_scale: float
    diverged: dict[str, float] = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    error_series: dict[str, list[list[float]]] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("error_series")
        return d


FAST_PERIOD_RESOLUTION = 20


def averaging_dt(initial: State, spec: ForcingSpec, ctrl: StepControl) -> float:
    """Base step, shrunk so each fast forcing period spans at least 20 steps."""
    dt = resolve_dt(initial, ctrl)
    rate = spec.max_rate()
    if rate > 0:
        dt = min(dt, 2 * math.pi / rate / FAST_PERIOD_RESOLUTION)
    return dt


def _compare_one(params, initial, spec, eta, horizon_T, ctrl, keep_series):
    forced = spec.with_eta(eta)
    averaged = averaged_spec(forced)
    n = step_count(horizon_T, averaging_dt(initial, forced, ctrl))
    dt = horizon_T / n
    sup = 0.0
    series = [[initial.time, 0.0]] if keep_series else None
    stride = max(1, n // 400)
    runs = zip(iterate(initial, params, forced, dt, n), iterate(initial, params, averaged, dt, n))
    for (i, w1, r1, t), (_, w2, r2, _) in runs:
        err = _diff(params, w1 - w2, r1 - r2)
        sup = max(sup, err)
        if keep_series and (i % stride == 0 or i == n):
            series.append([t, err])
    return sup, dt, series


def run_averaging_experiment(params: ModelParams, initial: State, spec: ForcingSpec,
                             eta_values, horizon_T: float, ctrl: StepControl,
                             config: dict | None = None,
                             keep_series: bool = False) -> AveragingExperimentReport:
    """Compare forced and time-averaged runs from the same initial state.

    Both systems are integrated over ``[t0, t0 + horizon_T]`` in the original
    clock with identical steps; the error at each step is the sum of the
    half-power norms of the vorticity and density differences, and its
    maximum over the steps is the sup error for that eta. Each eta is run
    independently, so the result does not depend on the order of the list.
    """
    etas = sorted({float(e) for e in eta_values})
    if not etas:
        raise ValueError("eta_values must not be empty")
    if etas[0] < 1:
        raise ValueError("eta values must be >= 1")
    if not horizon_T > 0:
        raise ValueError("horizon_T must be positive")
    if spec.grid not in (None, params.grid):
        raise GridMismatchError("forcing grid differs from params grid")

    def job(eta):
        try:
            return _compare_one(params, initial, spec, eta, horizon_T, ctrl, keep_series)
        except DivergenceError as err:
            return err

    with ThreadPoolExecutor(max_workers=min(_workers(), len(etas))) as pool:
        outcomes = list(pool.map(job, etas))

    done_eta, sups, dts, diverged, series = [], [], [], {}, {}
    for eta, out in zip(etas, outcomes):
        if isinstance(out, DivergenceError):
            logger.warning("eta=%g diverged at t=%.6g", eta, out.time)
            diverged[repr(eta)] = out.time
            continue
        sup, dt, s = out
        done_eta.append(eta)
        sups.append(sup)
        dts.append(dt)
        if s is not None:
            series[repr(eta)] = s
    order = None
    if len(sups) >= 2 and all(s > 0 for s in sups):
        order = float(np.polyfit(np.log(1.0 / np.array(done_eta)), np.log(sups), 1)[0])
    monotone = all(b < a for a, b in zip(sups, sups[1:]))
    scale = _diff(params, initial.omega.coefficients, initial.rho.coefficients)
    return AveragingExperimentReport(
        eta_values=done_eta, sup_errors=sups, horizon_T=float(horizon_T), fitted_order=order,
        monotone=monotone, dts=dts, state_scale=scale, diverged=diverged,
        config=config or {}, error_series=series,
    )
