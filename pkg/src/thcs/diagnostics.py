"""Norms along trajectories, decay-rate fits, the decay-constant certificate
and the functional-inequality audit."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import ModelParams, State
from .spectral import (
    LAMBDA1,
    SpectralField,
    WaveGrid,
    fractional_norm_coeffs,
    h1_norm,
    h2_norm,
    inverse_laplacian,
    jacobian,
    jacobian_coeffs,
    lp_norm,
    random_field,
    sobolev_norm,
    sobolev_norm_coeffs,
)

CSV_FIELDS = (
    "t", "l2_omega", "h1_omega", "l2_rho", "h1_rho", "h1_psi", "h2_psi", "h3_psi",
    "energy", "dissipation", "frac_half_omega", "frac_half_rho",
)

A1 = math.sqrt(1 + LAMBDA1 + LAMBDA1**2)
A1_SHARP = math.sqrt(1 + 1 / LAMBDA1 + 1 / LAMBDA1**2)
A2 = (1 / (4 * math.pi**2) + math.sqrt(2) / math.pi + 2) ** 0.25


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    l2_omega: float
    h1_omega: float
    l2_rho: float
    h1_rho: float
    h1_psi: float
    h2_psi: float
    h3_psi: float
    energy: float
    dissipation: float
    frac_half_omega: float
    frac_half_rho: float

    def row(self) -> tuple[float, ...]:
        return tuple(getattr(self, "time" if name == "t" else name) for name in CSV_FIELDS)


def record(state: State, params: ModelParams) -> DiagnosticsRecord:
    grid = state.grid
    w = state.omega.coefficients
    r = state.rho.coefficients
    psi = w * grid.inverse_laplacian_symbol
    h1_psi = sobolev_norm_coeffs(grid, psi, 1)
    h2_psi = sobolev_norm_coeffs(grid, psi, 2)
    h3_psi = sobolev_norm_coeffs(grid, psi, 3)
    l2_rho = sobolev_norm_coeffs(grid, r, 0)
    h1_rho = sobolev_norm_coeffs(grid, r, 1)
    n2 = params.n_squared
    return DiagnosticsRecord(
        time=float(state.time),
        l2_omega=sobolev_norm_coeffs(grid, w, 0),
        h1_omega=sobolev_norm_coeffs(grid, w, 1),
        l2_rho=l2_rho,
        h1_rho=h1_rho,
        h1_psi=h1_psi,
        h2_psi=h2_psi,
        h3_psi=h3_psi,
        energy=n2 * h1_psi**2 + l2_rho**2,
        dissipation=2 * params.nu * (n2 * h2_psi**2 + h1_rho**2 / params.prandtl),
        frac_half_omega=fractional_norm_coeffs(grid, w, 0.5, params.nu),
        frac_half_rho=fractional_norm_coeffs(grid, r, 0.5, params.nu),
    )


# --------------------------------------------------------------------------
# decay fits


@dataclass(frozen=True)
class DecayFit:
    window: tuple[float, float]
    rate: float
    intercept: float
    r_squared: float
    samples: int
    note: str = ""


class FitError(ValueError):
    pass


def fit_decay_rate(series, window: tuple[float, float] | None = None,
                   min_samples: int = 10) -> DecayFit:
    """Least-squares line through ``(t, ln v)``; the rate is minus the slope."""
    data = np.asarray(series, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise FitError("series must be a sequence of (t, value) pairs")
    t, v = data[:, 0], data[:, 1]
    if window is None:
        window = (float(t[0]), float(t[-1]))
    lo, hi = window
    if not hi > lo:
        raise FitError(f"window must satisfy t_hi > t_lo, got {window}")
    sel = (t >= lo) & (t <= hi)
    if sel.sum() < min_samples:
        raise FitError(f"window {window} holds {int(sel.sum())} samples, need >= {min_samples}")
    t, v = t[sel], v[sel]
    if np.any(~(v > 0)):
        raise FitError("nonpositive values inside the fit window")
    y = np.log(v)
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return DecayFit((float(lo), float(hi)), float(-slope), float(intercept), r2, int(sel.sum()))


def transient_window(times, energy, drop: float = 1e-2) -> tuple[float, float] | None:
    """Last half of the samples taken after the energy first falls below
    ``drop * E(0)``; ``None`` when it never does."""
    times = np.asarray(times)
    energy = np.asarray(energy)
    below = np.nonzero(energy < drop * energy[0])[0]
    if below.size == 0:
        return None
    first = below[0]
    idx = np.arange(first, len(times))
    tail = idx[len(idx) // 2:]
    return float(times[tail[0]]), float(times[tail[-1]])


# --------------------------------------------------------------------------
# certificate


@dataclass(frozen=True)
class DecayCertificate:
    lambda1: float
    alpha: float
    beta_rigorous: float
    a1: float
    a1_sharp: float
    a2: float
    delta: float
    delta2: float
    delta3: float
    delta1: float
    feasible: bool
    phi0: float | None
    nu_threshold: float
    pr_threshold_holds: bool
    alpha2: float
    t1: float | None
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return asdict(self)


def derive_certificate(params: ModelParams, initial: State, delta: float = 0.5,
                       delta2: float = 0.5, delta3: float = 0.5) -> DecayCertificate:
    """Evaluate the decay constants for ``params`` and initial data.

    ``alpha`` = (nu / lambda1) min(1, 1/Pr) is the weaker reference exponent;
    ``beta_rigorous`` = 2 nu lambda1 min(1, 1/Pr) is what the energy identity
    and Poincare actually give. Phi0 needs delta1 = alpha - (1 - delta) nu /
    lambda1 > 0; otherwise the certificate is flagged infeasible.
    """
    for name, v in (("delta", delta), ("delta2", delta2), ("delta3", delta3)):
        if not 0 < v < 1:
            raise ValueError(f"{name} must lie in (0, 1), got {v}")
    nu, pr, n2 = params.nu, params.prandtl, params.n_squared
    lam = LAMBDA1
    m = min(1.0, 1.0 / pr)
    alpha = nu / lam * m
    beta = 2 * nu * lam * m
    delta1 = alpha - (1 - delta) * nu / lam
    c = A1**4 * A2**4 * (6 + 2 * math.sqrt(2))
    nu_threshold = math.sqrt(c * pr**2 * lam / (4 * delta2 * (1 - delta2)))
    flags = []
    psi0 = inverse_laplacian(initial.omega)
    e0 = n2 * sobolev_norm(psi0, 1) ** 2 + sobolev_norm(initial.rho, 0) ** 2
    feasible = delta1 > 0
    phi0 = t1 = None
    pr_holds = False
    if feasible:
        phi0 = sobolev_norm(psi0, 2) ** 2 + lam / (4 * delta * (1 - delta) * delta1 * nu**2) * e0
        # sufficient at t = 0: Phi0 < 4 d2 (1 - d2) nu^2 / (c lambda1 Pr^2)
        pr_holds = phi0 < 4 * delta2 * (1 - delta2) * nu**2 / (c * lam * pr**2)
        arg = c * lam * pr**2 * phi0 / nu**2
        t1 = lam / ((1 - delta) * nu) * math.log(arg) if arg > 0 else 0.0
        t1 = max(t1, 0.0)
        flags.append("t1 evaluated with the undefined prefactor a = 1")
    else:
        flags.append("paper-constant infeasible: delta1 <= 0 for the chosen delta")
    alpha2 = min(delta3, n2 * nu / lam)
    return DecayCertificate(
        lambda1=lam, alpha=alpha, beta_rigorous=beta, a1=A1, a1_sharp=A1_SHARP, a2=A2,
        delta=delta, delta2=delta2, delta3=delta3, delta1=delta1, feasible=feasible,
        phi0=phi0, nu_threshold=nu_threshold, pr_threshold_holds=bool(pr_holds),
        alpha2=alpha2, t1=t1, flags=tuple(flags),
    )


# --------------------------------------------------------------------------
# inequality audit


@dataclass
class AuditReport:
    resolution: int
    trials: int
    seed: int
    a1: float
    a1_sharp: float
    a2: float
    jacobian_residual_max: float
    antisymmetry_residual_max: float
    h2_ratio_max: float
    h2_ratio_min: float
    l4_ratio_max: float
    lipschitz_max: float
    semigroup_ratio_max: float
    semigroup_decay_rate: float
    argmax: dict = field(default_factory=dict)

    @property
    def h2_ok(self) -> bool:
        return self.h2_ratio_max <= self.a1 and self.h2_ratio_min >= 1.0 - 1e-12

    @property
    def l4_ok(self) -> bool:
        return self.l4_ratio_max <= self.a2

    def to_dict(self) -> dict:
        d = asdict(self)
        d["h2_ok"] = self.h2_ok
        d["l4_ok"] = self.l4_ok
        return d


def _trial_fields(grid: WaveGrid, seed: int, trial: int):
    rng = np.random.default_rng([seed, trial])
    band = int(rng.integers(1, grid.dealias_cutoff + 1))
    slope = float(rng.uniform(0.0, 3.0))
    fields = [random_field(grid, rng, band=band, slope=slope) for _ in range(5)]
    return fields, {"trial": trial, "band": band, "slope": slope}


def _half(grid, c, nu=1.0):
    return fractional_norm_coeffs(grid, c, 0.5, nu)


def _audit_trial(grid: WaveGrid, seed: int, trial: int) -> dict:
    (f, g, h, u2, v2), desc = _trial_fields(grid, seed, trial)
    hf, hg, hh = h1_norm(f), h1_norm(g), h1_norm(h)
    fg = jacobian(f, g)
    jac_res = abs(fg.inner(g)) / (hf * hg**2)
    anti = abs(fg.inner(h) + jacobian(f, h).inner(g)) / (hf * (hg + hh) ** 2)
    lap_f = sobolev_norm(f, 2)
    h2_ratio = h2_norm(f) / lap_f
    l4_ratio = lp_norm(f, 4) / math.sqrt(sobolev_norm(f, 0) * sobolev_norm(f, 1))
    # Lipschitz constant of (u, v) -> J(lap^-1 u, v) in the half-power norm
    u1, v1 = f.coefficients, g.coefficients
    uu2, vv2 = u1 + 0.1 * u2.coefficients, v1 + 0.1 * v2.coefficients
    inv = grid.inverse_laplacian_symbol
    dj = jacobian_coeffs(grid, inv * u1, v1) - jacobian_coeffs(grid, inv * uu2, vv2)
    size = sum(_half(grid, c) for c in (u1, uu2, v1, vv2))
    gap = _half(grid, u1 - uu2) + _half(grid, v1 - vv2)
    lip = sobolev_norm_coeffs(grid, dj, 0) / (size * gap)
    return {"desc": desc, "jac": jac_res, "anti": anti, "h2": h2_ratio, "l4": l4_ratio, "lip": lip}


def semigroup_check(grid: WaveGrid, nu: float = 1.0, exponents=(0.0, 0.25, 0.5, 1.0, 1.5),
                    times=None) -> tuple[float, float]:
    """Largest ratio of sup_k mu_k^a exp(-mu_k t) to K_a t^-a exp(-c t).

    mu_k = nu 4 pi^2 |k|^2 over retained modes, c = nu lambda1 / 2 and
    K_a = (2a / e)^a (K_0 = 1). Ratios <= 1 confirm the smoothing bound.
    """
    mu = nu * LAMBDA1 * grid.k_squared[grid.mask]
    mu = np.unique(mu)
    if times is None:
        times = np.geomspace(1e-4, 10.0, 200) / nu
    decay = nu * LAMBDA1 / 2
    worst = 0.0
    for a in exponents:
        k_a = (2 * a / math.e) ** a if a > 0 else 1.0
        for t in times:
            lhs = np.max(mu**a * np.exp(-mu * t))
            rhs = k_a * t ** (-a) * math.exp(-decay * t)
            worst = max(worst, float(lhs / rhs))
    return worst, decay


def _workers() -> int:
    env = os.environ.get("THCS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def inequality_audit(grid: WaveGrid, trials: int = 1000, seed: int = 0) -> AuditReport:
    """Sweep seeded random band-limited fields through the functional inequalities.

    Each trial draws its own generator from ``(seed, trial)`` so the report does
    not depend on how trials are scheduled across threads.
    """
    if trials < 100:
        raise ValueError(f"the audit needs at least 100 trials, got {trials}")
    with ThreadPoolExecutor(max_workers=min(_workers(), 8)) as pool:
        results = list(pool.map(lambda i: _audit_trial(grid, seed, i), range(trials)))
    keys = ("jac", "anti", "h2", "l4", "lip")
    best = {k: max(results, key=lambda r: r[k]) for k in keys}
    sg_ratio, sg_rate = semigroup_check(grid)
    return AuditReport(
        resolution=grid.n, trials=trials, seed=seed, a1=A1, a1_sharp=A1_SHARP, a2=A2,
        jacobian_residual_max=best["jac"]["jac"],
        antisymmetry_residual_max=best["anti"]["anti"],
        h2_ratio_max=best["h2"]["h2"],
        h2_ratio_min=min(r["h2"] for r in results),
        l4_ratio_max=best["l4"]["l4"],
        lipschitz_max=best["lip"]["lip"],
        semigroup_ratio_max=sg_ratio,
        semigroup_decay_rate=sg_rate,
        argmax={k: best[k]["desc"] for k in keys},
    )
