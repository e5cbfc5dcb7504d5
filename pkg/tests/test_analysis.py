"""Response functions, envelope/spectrum estimation, ZN classification."""

import io

import numpy as np
import pytest

from propburn.analysis import (
    STABLE,
    UNSTABLE_EXPONENTIAL,
    UNSTABLE_OSCILLATORY,
    AnalysisError,
    ResponseSample,
    envelope_and_growth,
    error_metrics,
    linearized_response,
    response_table_csv,
    signal_maxima,
    spectral_peaks,
    zn_boundary_crossing,
    zn_classify,
    zn_exponential_boundary,
    zn_hopf_boundary,
)

D_C = 0.65 / (1806.0 * 1253.0)


def test_linearized_response_zero_frequency_limit():
    """R(f -> 0) recovers the steady pressure exponent n."""
    R = linearized_response(1e-6, A=10.7, B=1.47, n=0.497, D_c=D_C,
                            c_bar=1e-2)
    assert abs(R) == pytest.approx(0.497, rel=1e-6)
    assert R.imag == pytest.approx(0.0, abs=1e-6)


def test_linearized_response_decays_at_high_frequency():
    f = np.array([10.0, 100.0, 1e4, 1e6, 1e8])
    R = linearized_response(f, A=10.7, B=1.47, n=0.497, D_c=D_C, c_bar=1e-2)
    assert R.shape == f.shape
    gains = np.abs(R)
    # gain rolls off like 1/sqrt(f) past the thermal-relaxation band
    assert gains[-1] < 0.05 * gains.max()
    assert np.all(np.diff(gains[2:]) < 0.0)


def test_linearized_response_resonance_for_unstable_groups():
    """Near the Hopf boundary the gain develops a strong resonant peak."""
    f = np.linspace(1.0, 2000.0, 400)
    stable = np.abs(linearized_response(f, A=10.7, B=1.47, n=0.5,
                                        D_c=D_C, c_bar=1e-2))
    marginal = np.abs(linearized_response(f, A=12.15, B=0.6332, n=0.5,
                                          D_c=D_C, c_bar=0.971e-2))
    assert marginal.max() > 5.0 * stable.max()
    f_peak = f[np.argmax(marginal)]
    assert 400.0 < f_peak < 620.0


# ---------------------------------------------------------------------------
# envelope and spectra


def test_signal_maxima_synthetic():
    t = np.linspace(0.0, 1.0, 2001)
    y = np.sin(2 * np.pi * 5.0 * t)
    tm, ym = signal_maxima(t, y)
    assert len(tm) == 5
    assert np.allclose(ym, 1.0, atol=1e-6)
    assert np.allclose(tm, 0.05 + 0.2 * np.arange(5), atol=1e-6)


def test_envelope_growth_synthetic():
    t = np.linspace(0.0, 2.0, 4001)
    y = 900.0 + 0.5 * np.exp(3.0 * t) * np.sin(2 * np.pi * 40.0 * t)
    _, _, A, b = envelope_and_growth(t, y, baseline=900.0)
    assert b == pytest.approx(3.0, rel=0.02)
    assert A == pytest.approx(0.5, rel=0.05)


def test_envelope_decay_synthetic():
    t = np.linspace(0.0, 2.0, 4001)
    y = 900.0 + 5.0 * np.exp(-2.0 * t) * np.sin(2 * np.pi * 40.0 * t)
    _, _, _, b = envelope_and_growth(t, y, baseline=900.0)
    assert b == pytest.approx(-2.0, rel=0.02)


def test_envelope_needs_enough_maxima():
    t = np.linspace(0.0, 1.0, 50)
    with pytest.raises(AnalysisError):
        envelope_and_growth(t, np.exp(t), baseline=0.0)


def test_spectral_peaks_synthetic_452():
    t = np.linspace(0.0, 0.5, 40001)
    y = 3.0 * np.sin(2 * np.pi * 452.0 * t + 0.3)
    peaks = spectral_peaks(t, y, n_peaks=1)
    f, a = peaks[0]
    assert f == pytest.approx(452.0, rel=1e-4)
    assert a == pytest.approx(3.0, rel=1e-2)


def test_spectral_peaks_two_tone_ordering():
    t = np.linspace(0.0, 0.5, 40001)
    y = (2.0 * np.sin(2 * np.pi * 452.0 * t)
         + 0.7 * np.sin(2 * np.pi * 904.0 * t))
    peaks = spectral_peaks(t, y, n_peaks=2)
    assert peaks[0][0] == pytest.approx(452.0, rel=1e-3)
    assert peaks[1][0] == pytest.approx(904.0, rel=1e-3)
    assert peaks[0][1] > peaks[1][1]


def test_spectral_refinement_beats_fft_bin():
    """The correlation refinement localizes the peak at least 10x better
    than the raw FFT bin width."""
    t = np.linspace(0.0, 0.1, 4001)
    f_true = 441.3
    y = np.sin(2 * np.pi * f_true * t)
    bin_width = 1.0 / (t[-1] - t[0])
    f_ref = spectral_peaks(t, y, n_peaks=1)[0][0]
    f_raw = spectral_peaks(t, y, n_peaks=1, refine=False)[0][0]
    assert abs(f_ref - f_true) < bin_width / 10.0
    assert abs(f_ref - f_true) <= abs(f_raw - f_true)


def test_spectral_peaks_needs_samples():
    with pytest.raises(AnalysisError):
        spectral_peaks(np.linspace(0, 1, 4), np.zeros(4))


# ---------------------------------------------------------------------------
# ZN classification


def test_zn_boundaries_reference_values():
    assert zn_hopf_boundary(1.75) == pytest.approx(0.75**2 / 2.75)
    assert zn_exponential_boundary(4.0) == pytest.approx(1.0)
    # worked examples on the r=0.137 line
    assert zn_classify(0.137, 1.75) == UNSTABLE_OSCILLATORY
    assert zn_classify(0.137, 1.5) == STABLE
    assert zn_classify(0.137, 0.5) == STABLE   # k < 1 always stable
    assert zn_classify(0.01, 9.0) == UNSTABLE_EXPONENTIAL


def test_zn_orderings():
    # a point between the two boundaries flips with the ordering convention
    k = 9.0
    r = 0.5 * (zn_hopf_boundary(k) + zn_exponential_boundary(k))
    assert zn_classify(r, k) != zn_classify(r, k, ordering="printed")
    with pytest.raises(AnalysisError):
        zn_classify(r, k, ordering="bogus")
    with pytest.raises(AnalysisError):
        zn_classify(np.nan, 1.5)


def test_zn_boundary_crossing_reference():
    k_star = zn_boundary_crossing(0.137)
    assert k_star == pytest.approx(1.596, abs=0.005)
    assert zn_hopf_boundary(k_star) == pytest.approx(0.137, abs=1e-10)
    # consistency: classification flips across the crossing
    assert zn_classify(0.137, k_star - 0.01) == STABLE
    assert zn_classify(0.137, k_star + 0.01) != STABLE


# ---------------------------------------------------------------------------
# error metrics


def test_error_metrics_constant_offset():
    t = np.linspace(0.0, 1.0, 101)
    eps_Ts, eps_rhou, rel = error_metrics(t, np.full_like(t, 905.0),
                                          t, np.full_like(t, 900.0))
    assert eps_Ts == pytest.approx(5.0, rel=1e-8)
    assert np.isnan(eps_rhou)
    assert rel == pytest.approx(5.0 / 900.0, rel=1e-8)


def test_error_metrics_sine_difference():
    """Time-averaged |sin| over whole periods is 2/pi."""
    t = np.linspace(0.0, 2.0, 4001)
    a = 900.0 + np.sin(2 * np.pi * 5.0 * t)
    eps_Ts, _, _ = error_metrics(t, a, t, np.full_like(t, 900.0))
    assert eps_Ts == pytest.approx(2.0 / np.pi, rel=1e-3)


def test_error_metrics_mass_flux_rms():
    t = np.linspace(0.0, 1.0, 11)
    _, eps_rhou, _ = error_metrics(t, t, t, t,
                                   m_final=np.array([1.0, 2.0, 3.0]),
                                   m_ref_final=np.array([1.0, 1.0, 1.0]))
    assert eps_rhou == pytest.approx(np.sqrt(5.0 / 3.0))


def test_error_metrics_requires_overlap():
    with pytest.raises(AnalysisError):
        error_metrics(np.array([0.0, 1.0]), np.array([1.0, 1.0]),
                      np.array([2.0, 3.0]), np.array([1.0, 1.0]))


# ---------------------------------------------------------------------------
# response table serialization


def test_response_sample_properties():
    s = ResponseSample(frequency=100.0, R=1.0 + 1.0j)
    assert s.gain == pytest.approx(np.sqrt(2.0))
    assert s.phase == pytest.approx(np.pi / 4.0)


def test_response_table_csv():
    samples = [ResponseSample(10.0, 0.5 + 0.1j),
               ResponseSample(100.0, 0.3 - 0.2j)]
    buf = io.StringIO()
    response_table_csv(samples, buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "frequency_hz,gain,phase_rad,re,im"
    assert len(lines) == 3
    row = lines[1].split(",")
    assert float(row[0]) == 10.0
    assert float(row[3]) == pytest.approx(0.5)
    assert float(row[4]) == pytest.approx(0.1)
