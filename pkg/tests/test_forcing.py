import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import trapezoid

from thcs.forcing import (
    ForcingSpec,
    TemporalWaveform,
    assumption_report,
    average_defect,
    averaged_spec,
    evaluate_forcing,
    time_average,
)
from thcs.spectral import (
    GridMismatchError,
    WaveGrid,
    fractional_operator_norm,
    single_mode,
)

G32 = WaveGrid(32)
F0 = single_mode(G32, 1, 1, 1.0, ("sine", "sine"))
G = single_mode(G32, 0, 1, 1.0, ("cosine", "sine"))
H = single_mode(G32, 2, 1, 0.5, ("cosine", "cosine"))

CONST = TemporalWaveform("constant")


def cosine(freq=1.0, phase=0.0):
    return TemporalWaveform("cosine", freq, phase)


def spec_cos(eta=4.0, freq=1.0):
    return ForcingSpec(((F0, CONST), (G, cosine(freq))), eta)


def test_constant_component_is_time_independent():
    spec = ForcingSpec.constant(F0)
    for t in (0.0, 0.3, 17.0):
        assert evaluate_forcing(spec, t).allclose(F0, atol=0)


def test_cosine_at_quarter_period_vanishes():
    eta = 4.0
    spec = ForcingSpec(((G, cosine()),), eta)
    t = (math.pi / 2) / eta
    assert np.max(np.abs(evaluate_forcing(spec, t).coefficients)) < 1e-15


@pytest.mark.parametrize("t", [0.0, 0.1, 1.7, 25.0])
def test_superposition_is_linear(t):
    a = ForcingSpec(((F0, CONST), (G, cosine(1.3, 0.2))), 5.0)
    b = ForcingSpec(((H, TemporalWaveform("sine", 2.0, 0.5)),), 5.0)
    both = ForcingSpec(a.components + b.components, 5.0)
    assert evaluate_forcing(both, t).allclose(evaluate_forcing(a, t) + evaluate_forcing(b, t), atol=1e-15)


@pytest.mark.parametrize("eta,freq", [(1.0, 1.0), (4.0, 2.5), (256.0, 1.0)])
def test_single_cosine_is_periodic(eta, freq):
    spec = ForcingSpec(((G, cosine(freq, 0.4)),), eta)
    period = 2 * math.pi / (eta * freq)
    for t in (0.0, 0.37, 1.9):
        assert evaluate_forcing(spec, t).allclose(evaluate_forcing(spec, t + period), atol=1e-12)


def test_finite_series_matches_explicit_sum():
    wave = TemporalWaveform("finite_series", terms=((1.0, 1.0, 0.0), (0.5, 3.0, 0.7)))
    for s in (0.0, 0.4, 2.2):
        assert wave.value(s) == pytest.approx(math.cos(s) + 0.5 * math.cos(3 * s + 0.7), abs=1e-15)


def test_sine_waveform_is_shifted_cosine():
    wave = TemporalWaveform("sine", 2.0, 0.3)
    (a, w, p), = wave.cosine_terms()
    for s in (0.0, 0.5, 1.3):
        assert a * math.cos(w * s + p) == pytest.approx(wave.value(s), abs=1e-15)


@pytest.mark.parametrize("kw", [
    {"kind": "square"},
    {"kind": "cosine", "frequency": 0.0},
    {"kind": "finite_series", "terms": ()},
    {"kind": "finite_series", "terms": ((1.0, -1.0, 0.0),)},
    {"kind": "finite_series", "terms": ((1.0, 1.0),)},
])
def test_waveform_validation(kw):
    with pytest.raises(ValueError):
        TemporalWaveform(**kw)


def test_spec_rejects_mixed_grids():
    other = single_mode(WaveGrid(16), 1, 0, 1.0, ("cosine", "cosine"))
    with pytest.raises(GridMismatchError):
        ForcingSpec(((F0, CONST), (other, CONST)))


def test_spec_rejects_nonpositive_eta():
    with pytest.raises(ValueError):
        ForcingSpec(((F0, CONST),), eta=0.0)


def test_time_average_keeps_constant_part():
    assert time_average(spec_cos()).allclose(F0, atol=0)


def test_time_average_of_oscillation_is_zero():
    spec = ForcingSpec(((G, cosine()), (H, TemporalWaveform("sine", 3.0))), 2.0)
    assert np.all(time_average(spec).coefficients == 0)


def test_time_average_of_constant_spec_is_bitwise_identity():
    spec = ForcingSpec(((F0, CONST), (H, CONST)))
    avg = time_average(spec)
    assert np.array_equal(avg.coefficients, evaluate_forcing(spec, 3.0).coefficients)
    assert averaged_spec(spec).components[0][1].is_constant


def test_time_average_matches_quadrature_over_many_periods():
    eta = 3.0
    wave = TemporalWaveform("finite_series", terms=((1.0, 1.0, 0.3), (0.25, 2.0, 1.0)))
    spec = ForcingSpec(((F0, CONST), (G, wave)), eta)
    T = 1e4 * 2 * math.pi / eta
    t = np.linspace(0.0, T, 10**4 * 64 + 1)
    samples = np.cos(eta * t + 0.3) + 0.25 * np.cos(2 * eta * t + 1.0)
    mean_wave = trapezoid(samples, t) / T
    numeric = F0.coefficients + G.coefficients * mean_wave
    assert np.max(np.abs(numeric - time_average(spec).coefficients)) < 1e-8


def test_defect_zero_for_constant_spec():
    spec = ForcingSpec(((F0, CONST),), 10.0)
    for T in (0.5, 1.0, 64.0):
        assert average_defect(spec, 0.0, T) == 0.0


@pytest.mark.parametrize("eta", [1.0, 4.0, 16.0, 256.0])
@pytest.mark.parametrize("T", [0.3, 1.0, 8.0, 64.0])
def test_defect_matches_closed_form(eta, T):
    nu, gamma = 0.1, 0.5
    got = average_defect(spec_cos(eta), 0.0, T, gamma, nu)
    expect = abs(math.sin(eta * T) / (eta * T)) * fractional_operator_norm(G, gamma, nu)
    assert got == pytest.approx(expect, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(t0=st.floats(0, 50), T=st.floats(0.1, 50), eta=st.floats(1, 100))
def test_defect_bounded_by_two_over_eta_T(t0, T, eta):
    # |(1/T) int cos| <= 2 / (eta T), and never more than the amplitude
    d = average_defect(spec_cos(eta), t0, T, 0.5, 1.0)
    norm_g = fractional_operator_norm(G, 0.5, 1.0)
    assert d <= min(1.0, 2.0 / (eta * T)) * norm_g * (1 + 1e-12)


def test_finite_series_defect_bounded_by_termwise_closed_forms():
    eta, nu = 4.0, 0.2
    terms = ((1.0, 1.0, 0.0), (0.5, 3.0, 0.0), (0.25, 5.0, 0.0))
    spec = ForcingSpec(((G, TemporalWaveform("finite_series", terms=terms)),), eta)
    norm_g = fractional_operator_norm(G, 0.5, nu)
    for T in (1.0, 2.0, 4.0, 8.0):
        bound = sum(abs(a * math.sin(eta * w * T) / (eta * w * T)) for a, w, _ in terms) * norm_g
        assert average_defect(spec, 0.0, T, 0.5, nu) <= bound + 1e-10


@pytest.mark.parametrize("kind", ["cosine", "sine", "finite_series"])
def test_defect_envelope_decays_for_every_kind(kind):
    wave = (TemporalWaveform("finite_series", terms=((1.0, 1.0, 0.2), (1.0, 2.0, 0.0)))
            if kind == "finite_series" else TemporalWaveform(kind, 1.0, 0.3))
    rep = assumption_report(ForcingSpec(((G, wave),), 4.0), windows=(1, 2, 4, 8, 16, 32, 64))
    assert all(b <= a for a, b in zip(rep.sigma, rep.sigma[1:]))
    assert rep.sigma[-1] < rep.sigma[0] / 16
    assert all(d <= s * (1 + 1e-12) for d, s in zip(rep.defects, rep.sigma))


@pytest.mark.parametrize("eta", [4.0, 16.0, 64.0, 256.0])
def test_sigma_slope_is_minus_one(eta):
    rep = assumption_report(spec_cos(eta), gamma=0.5, nu=0.1)
    assert rep.fitted_sigma_slope == pytest.approx(-1.0, abs=0.05)
    assert rep.m_gamma >= max(rep.defects)


def test_report_for_constant_spec_marks_slope_not_applicable():
    rep = assumption_report(ForcingSpec(((F0, CONST),), 4.0))
    assert rep.fitted_sigma_slope is None
    assert "not applicable" in rep.note
    assert rep.defects == [0.0] * len(rep.windows)
    assert rep.m_gamma == 0.0


@pytest.mark.parametrize("windows", [(), (2, 1), (1, 1)])
def test_report_rejects_bad_windows(windows):
    with pytest.raises(ValueError):
        assumption_report(spec_cos(), windows=windows)


def test_max_rate_scales_with_eta():
    assert spec_cos(16.0, 2.0).max_rate() == 32.0
    assert ForcingSpec.constant(F0).max_rate() == 0.0
