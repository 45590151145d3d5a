"""Wind forcing built from fixed spatial modes times trigonometric waveforms.

Keeping forcing to finite trigonometric sums makes the time average and the
windowed averages of the averaging assumption available in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .spectral import GridMismatchError, SpectralField, WaveGrid, fractional_norm_coeffs

WAVEFORM_KINDS = ("constant", "cosine", "sine", "finite_series")


@dataclass(frozen=True)
class TemporalWaveform:
    kind: str = "constant"
    frequency: float = 1.0
    phase: float = 0.0
    terms: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in WAVEFORM_KINDS:
            raise ValueError(f"waveform kind must be one of {WAVEFORM_KINDS}, got {self.kind!r}")
        if self.kind in ("cosine", "sine") and not self.frequency > 0:
            raise ValueError("oscillatory waveforms need a positive frequency")
        if self.kind == "finite_series":
            terms = tuple(tuple(float(v) for v in t) for t in self.terms)
            if not terms:
                raise ValueError("finite_series needs at least one term")
            if any(len(t) != 3 for t in terms):
                raise ValueError("series terms are (amplitude, frequency, phase)")
            if any(t[1] <= 0 for t in terms):
                raise ValueError("finite_series frequencies must be strictly positive")
            object.__setattr__(self, "terms", terms)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def cosine_terms(self) -> list[tuple[float, float, float]]:
        """The waveform as a list of ``a cos(w s + p)`` terms; empty when constant."""
        if self.kind == "cosine":
            return [(1.0, self.frequency, self.phase)]
        if self.kind == "sine":
            return [(1.0, self.frequency, self.phase - math.pi / 2)]
        if self.kind == "finite_series":
            return list(self.terms)
        return []

    def value(self, s: float) -> float:
        """Waveform at fast time ``s`` (already multiplied by eta)."""
        if self.kind == "constant":
            return 1.0
        if self.kind == "cosine":
            return math.cos(self.frequency * s + self.phase)
        if self.kind == "sine":
            return math.sin(self.frequency * s + self.phase)
        return sum(a * math.cos(w * s + p) for a, w, p in self.terms)

    def window_mean(self, t0: float, length: float, eta: float) -> float:
        """Exact mean of ``value(eta * t)`` over ``[t0, t0 + length]``."""
        if self.kind == "constant":
            return 1.0
        total = 0.0
        for a, w, p in self.cosine_terms():
            rate = eta * w
            total += a * (math.sin(rate * (t0 + length) + p) - math.sin(rate * t0 + p)) / (rate * length)
        return total

    def max_frequency(self) -> float:
        return max((w for _, w, _ in self.cosine_terms()), default=0.0)


@dataclass(frozen=True)
class ForcingSpec:
    """f(x, z, t) = sum_j mode_j(x, z) * waveform_j(eta * t)."""

    components: tuple[tuple[SpectralField, TemporalWaveform], ...] = ()
    eta: float = 1.0

    def __post_init__(self):
        comps = tuple((m, w) for m, w in self.components)
        object.__setattr__(self, "components", comps)
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        grids = {m.grid for m, _ in comps}
        if len(grids) > 1:
            raise GridMismatchError("forcing components live on different grids")

    @classmethod
    def constant(cls, mode: SpectralField) -> "ForcingSpec":
        return cls(((mode, TemporalWaveform("constant")),))

    @property
    def grid(self) -> WaveGrid | None:
        return self.components[0][0].grid if self.components else None

    @property
    def is_zero(self) -> bool:
        return all(not np.any(m.coefficients) for m, _ in self.components)

    def with_eta(self, eta: float) -> "ForcingSpec":
        return replace(self, eta=float(eta))

    def max_rate(self) -> float:
        """Largest angular frequency in the original clock, eta * frequency."""
        return self.eta * max((w.max_frequency() for _, w in self.components), default=0.0)

    def coefficients_at(self, t: float) -> np.ndarray | None:
        if not self.components:
            return None
        out = np.zeros_like(self.components[0][0].coefficients)
        for mode, wave in self.components:
            out = out + mode.coefficients * wave.value(self.eta * t)
        return out


def evaluate_forcing(spec: ForcingSpec, t: float) -> SpectralField:
    if spec.grid is None:
        raise ValueError("forcing spec has no components and hence no grid")
    return SpectralField(spec.grid, spec.coefficients_at(t))


def time_average(spec: ForcingSpec) -> SpectralField:
    """Exact long-time mean: only constant components survive."""
    if spec.grid is None:
        raise ValueError("forcing spec has no components and hence no grid")
    out = np.zeros_like(spec.components[0][0].coefficients)
    for mode, wave in spec.components:
        if wave.is_constant:
            out = out + mode.coefficients * 1.0
    return SpectralField(spec.grid, out)


def averaged_spec(spec: ForcingSpec) -> ForcingSpec:
    """The forcing of the averaged system, f0 held constant in time."""
    return replace(ForcingSpec.constant(time_average(spec)), eta=spec.eta)


def _window_coefficients(spec: ForcingSpec, t_start: float, T: float) -> np.ndarray:
    out = np.zeros_like(spec.components[0][0].coefficients)
    for mode, wave in spec.components:
        if not wave.is_constant:
            out = out + mode.coefficients * wave.window_mean(t_start, T, spec.eta)
    return out


def average_defect(spec: ForcingSpec, t_start: float, T: float, gamma: float = 0.5,
                   nu: float = 1.0) -> float:
    """||A^gamma ((1/T) int_{t_start}^{t_start+T} f - f0)|| with A = -nu Laplacian."""
    if not T > 0:
        raise ValueError("window length T must be positive")
    if spec.grid is None:
        return 0.0
    return fractional_norm_coeffs(spec.grid, _window_coefficients(spec, t_start, T), gamma, nu)


@dataclass
class AveragingAssumptionReport:
    gamma: float
    windows: list[float]
    defects: list[float]
    sigma: list[float]
    m_gamma: float
    fitted_sigma_slope: float | None
    note: str = ""
    uniform_defects: list[float] = field(default_factory=list)


def _uniform_defects(spec: ForcingSpec, T_values: np.ndarray, gamma: float, nu: float,
                     n_phase: int = 64) -> np.ndarray:
    """Worst case over window start of the windowed defect, for each window length.

    The defect is a quadratic form in the per-term window means; window starts
    are sampled over one period of the slowest oscillation.
    """
    grid = spec.grid
    terms = []
    for mode, wave in spec.components:
        for a, w, p in wave.cosine_terms():
            terms.append((mode.coefficients * a, spec.eta * w, p))
    if not terms:
        return np.zeros_like(T_values)
    weight = (nu * 4 * np.pi**2 * grid.k_squared) ** (2 * gamma) if gamma else np.ones(grid.k_squared.shape)
    gram = np.empty((len(terms), len(terms)))
    for i, (ci, _, _) in enumerate(terms):
        for j, (cj, _, _) in enumerate(terms):
            gram[i, j] = np.real(np.sum(weight * ci * np.conj(cj)))
    rates = np.array([r for _, r, _ in terms])
    phases = np.array([p for _, _, p in terms])
    period = 2 * np.pi / rates.min()
    starts = np.arange(n_phase) * period / n_phase
    t0 = starts[:, None, None]
    T = T_values[None, :, None]
    means = (np.sin(rates * (t0 + T) + phases) - np.sin(rates * t0 + phases)) / (rates * T)
    quad = np.einsum("stj,jk,stk->st", means, gram, means)
    return np.sqrt(np.maximum(quad, 0.0)).max(axis=0)


def assumption_report(spec: ForcingSpec, gamma: float = 0.5, nu: float = 1.0,
                      windows=(1, 2, 4, 8, 16, 32, 64), t_start: float = 0.0,
                      samples_per_period: int = 400) -> AveragingAssumptionReport:
    """Check the windowed-average assumption for ``spec`` over window lengths.

    ``defects`` are the defects for windows starting at ``t_start``.
    ``sigma`` is the least nonincreasing majorant of the worst-case-in-start
    defect, sigma(T) = sup over T' >= T and all starts; its log-log slope
    against T is ``fitted_sigma_slope``. ``m_gamma`` bounds every defect.
    """
    windows = [float(T) for T in windows]
    if not windows:
        raise ValueError("at least one window is required")
    if any(b <= a for a, b in zip(windows, windows[1:])):
        raise ValueError("windows must be strictly increasing")
    defects = [average_defect(spec, t_start, T, gamma, nu) for T in windows]
    rate = spec.max_rate()
    slowest = min((spec.eta * w for _, wv in spec.components for _, w, _ in wv.cosine_terms()),
                  default=0.0)
    if rate == 0.0 or spec.is_zero:
        return AveragingAssumptionReport(gamma, windows, defects, [0.0] * len(windows),
                                         max(defects, default=0.0), None,
                                         note="no oscillatory forcing: slope not applicable",
                                         uniform_defects=[0.0] * len(windows))
    span = 2 * np.pi / slowest
    sigma, uniform = [], []
    for T in windows:
        n = max(int(samples_per_period * span * rate / (2 * np.pi)), samples_per_period)
        grid_T = T + np.linspace(0.0, span, n + 1)
        sup_vals = _uniform_defects(spec, grid_T, gamma, nu)
        sigma.append(float(sup_vals.max()))
        uniform.append(float(sup_vals[0]))
    # Later windows can be shorter than one span past T; keep sigma nonincreasing.
    sigma = list(np.maximum.accumulate(sigma[::-1])[::-1])
    m_gamma = max(max(defects), max(uniform))
    slope = None
    note = ""
    if len(windows) >= 2 and all(s > 0 for s in sigma):
        slope = float(np.polyfit(np.log(windows), np.log(sigma), 1)[0])
    else:
        note = "slope not applicable"
    return AveragingAssumptionReport(gamma, windows, defects, [float(s) for s in sigma],
                                     float(m_gamma), slope, note, uniform)
