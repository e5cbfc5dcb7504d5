"""Post-processing and theory-side computations.

Covers the linearized pressure-coupled response function, numerical
frequency-response extraction from forced runs, exponential envelope fits
and spectral peak refinement for limit cycles, the ZN (surface-coupled
linear stability) classification, and the error metrics used by the
work-precision studies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq, minimize_scalar


class AnalysisError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# linearized response

def linearized_response(f, A, B, n, D_c, c_bar):
    """Quasi-steady linearized pressure-coupled response R_mp(f).

    A, B are the dimensionless surface-coupling groups, n the steady
    pressure exponent, D_c the solid thermal diffusivity and c_bar the mean
    regression speed.  f may be an array; the result is complex.
    """
    f = np.asarray(f, dtype=float)
    omega = 2.0 * np.pi * f * D_c / c_bar**2
    y = np.sqrt(1.0 + 16.0 * omega**2)
    s = 0.5 * (1.0 + np.sqrt(0.5 * (y + 1.0)) + 1j * np.sqrt(0.5 * (y - 1.0)))
    den = s + A / s - (1.0 + A) + A * B
    if np.any(np.abs(den) < 1e-12):
        raise AnalysisError("linearized response evaluated at a pole")
    out = n * A * B / den
    return out if out.ndim else complex(out)


@dataclass
class ResponseSample:
    frequency: float
    R: complex

    @property
    def gain(self):
        return abs(self.R)

    @property
    def phase(self):
        return math.atan2(self.R.imag, self.R.real)


def _sin_cos_projection(t, y, f):
    """Complex amplitude M of the f-component: y ~ Re(M) sin + Im(M) cos.

    A pure sine at f maps to a real positive M and arg(M) is the phase
    lead relative to sin(2 pi f t).  Trapezoidal quadrature.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    span = t[-1] - t[0]
    w = 2.0 * np.pi * f
    a = 2.0 * np.trapezoid(y * np.sin(w * t), t) / span
    b = 2.0 * np.trapezoid(y * np.cos(w * t), t) / span
    return a + 1j * b


def forced_response(model, mesh, f, p_rel=1e-3, P_bar=50e5, method="esdirk43b",
                    rtol=1e-6, atol=1e-7, n_periods=8, fit_periods=4,
                    steady=None, n_samples_per_period=64):
    """Numerical pressure-coupled response at frequency f.

    Starts from the steady solution at P_bar, forces
    P(t) = P_bar (1 + p_rel sin(2 pi f t)), integrates n_periods periods
    and projects the mass-flux fluctuation of the last fit_periods onto the
    forcing harmonic.  Returns a ResponseSample.
    """
    from .discretization import Discretization, Forcing
    from .integrators import StepController, integrate
    from .steady import steady_by_relaxation, steady_by_shooting

    if p_rel == 0.0:
        raise AnalysisError("zero forcing amplitude gives an undefined ratio")
    if f <= 0.0:
        raise AnalysisError("forcing frequency must be positive")
    period = 1.0 / f
    t_end = n_periods * period
    forcing = Forcing.harmonic(P_bar, p_rel, f)
    disc = Discretization(model, mesh, forcing)
    if isinstance(steady, np.ndarray):
        # pre-relaxed discrete steady state on this mesh
        X0 = steady
    else:
        sol = steady or steady_by_shooting(model, P_bar)
        # relax the interpolated profile to the discrete steady state of
        # this mesh; the leftover interpolation transient is stiff and
        # would otherwise dominate the first step's error estimate
        _, X0 = steady_by_relaxation(model, mesh, P_bar,
                                     X0=sol.to_state(disc))
    ctrl = StepController(rtol=rtol, atol=atol,
                          dt_max=period / n_samples_per_period,
                          dt_init=period / 1000.0)
    _, hist = integrate(disc, X0, (0.0, t_end), method=method,
                        controller=ctrl)
    m_of_t = hist.surface_interpolant("m_surf")
    t_fit = np.linspace(t_end - fit_periods * period, t_end,
                        fit_periods * n_samples_per_period + 1)
    m_fit = m_of_t(t_fit)
    m_bar = np.mean(m_fit)
    M = _sin_cos_projection(t_fit, m_fit - m_bar, f)
    R = (M / m_bar) / p_rel
    if not np.isfinite(R):
        raise AnalysisError("forced response did not reach a periodic state")
    return ResponseSample(frequency=float(f), R=complex(R))


# ---------------------------------------------------------------------------
# limit-cycle envelope and spectrum

def signal_maxima(t, y):
    """Times and values of local maxima of a cubic interpolant of y(t)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    t, idx = np.unique(t, return_index=True)
    y = y[idx]
    spline = CubicSpline(t, y)
    dspline = spline.derivative()
    roots = dspline.roots(extrapolate=False)
    roots = roots[np.isreal(roots)].real
    curv = spline(roots, 2)
    tm = roots[curv < 0.0]
    return tm, spline(tm)


def envelope_and_growth(t, y, baseline=None):
    """Exponential envelope fit through the local maxima of y(t).

    Fits max(y) - baseline = A exp(b t) by linear least squares in log
    space, keeping only maxima above the baseline.  baseline defaults to
    y[0].  Returns (t_max, y_max, A, b).
    """
    base = float(y[0]) if baseline is None else float(baseline)
    tm, ym = signal_maxima(t, y)
    if len(tm) < 3:
        raise AnalysisError(f"only {len(tm)} maxima found; need at least 3")
    keep = ym - base > 0.0
    if keep.sum() < 3:
        raise AnalysisError("fewer than 3 maxima above the baseline")
    tk, yk = tm[keep], ym[keep]
    coeffs = np.polyfit(tk, np.log(yk - base), 1)
    b, logA = coeffs
    return tm, ym, float(np.exp(logA)), float(b)


def spectral_peaks(t, y, window=None, n_peaks=3, min_separation=None,
                   refine=True):
    """Dominant spectral peaks of y(t) as (frequency, amplitude) pairs.

    The signal is resampled onto a uniform grid by cubic interpolation,
    coarse peaks are located with an FFT, and each peak frequency is then
    refined by maximizing the magnitude of the correlation with
    exp(2 i pi f t) over the window.  Peaks are returned sorted by
    descending amplitude.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is not None:
        mask = (t >= window[0]) & (t <= window[1])
        t, y = t[mask], y[mask]
    if len(t) < 8:
        raise AnalysisError("window contains too few samples")
    t_u, idx = np.unique(t, return_index=True)
    y_u = y[idx]
    n = max(len(t_u), 512)
    tu = np.linspace(t_u[0], t_u[-1], n)
    yu = CubicSpline(t_u, y_u)(tu)
    yu = yu - np.mean(yu)
    dt = tu[1] - tu[0]
    spec = np.fft.rfft(yu * np.hanning(n))
    freqs = np.fft.rfftfreq(n, dt)
    mag = np.abs(spec)
    # local maxima of the magnitude spectrum, skipping the DC bin
    cand = [i for i in range(2, len(mag) - 1)
            if mag[i] >= mag[i - 1] and mag[i] > mag[i + 1]]
    cand.sort(key=lambda i: -mag[i])
    if min_separation is None:
        min_separation = 2.0 * freqs[1]
    picked = []
    for i in cand:
        if all(abs(freqs[i] - f0) > min_separation for f0, _ in picked):
            picked.append((freqs[i], i))
        if len(picked) == n_peaks:
            break

    df = freqs[1]
    out = []
    for f0, _ in picked:
        if refine:
            res = minimize_scalar(
                lambda f: -abs(_sin_cos_projection(tu, yu, f)),
                bounds=(max(f0 - df, 0.5 * df), f0 + df), method="bounded",
                options={"xatol": 1e-6 * max(f0, df)})
            f_ref = float(res.x)
        else:
            f_ref = float(f0)
        amp = abs(_sin_cos_projection(tu, yu, f_ref))
        out.append((f_ref, float(amp)))
    out.sort(key=lambda p: -p[1])
    return out


# ---------------------------------------------------------------------------
# ZN stability classification

STABLE = "Stable"
UNSTABLE_OSCILLATORY = "UnstableOscillatory"
UNSTABLE_EXPONENTIAL = "UnstableExponential"


def zn_hopf_boundary(k):
    """Critical r below which steady burning is linearly unstable (k > 1)."""
    return (k - 1.0) ** 2 / (1.0 + k)


def zn_exponential_boundary(k):
    """Boundary separating oscillatory from purely exponential growth."""
    return (math.sqrt(k) - 1.0) ** 2


def zn_classify(r, k, ordering="classical"):
    """ZN linear stability classification of a steady solution.

    r is the surface-temperature sensitivity, k the scaled mass-flux
    sensitivity.  Stable iff k < 1 or r > (k-1)^2/(1+k).  Within the
    unstable region the (sqrt(k)-1)^2 line separates oscillatory from
    purely exponential growth; `ordering` selects which side is
    exponential: "classical" places exponential growth at
    r < (sqrt(k)-1)^2, "printed" at r > (sqrt(k)-1)^2 (the two readings
    found in the literature disagree; classical is the default).
    """
    if not (np.isfinite(r) and np.isfinite(k)):
        raise AnalysisError("non-finite ZN coefficients")
    if k < 1.0 or r > zn_hopf_boundary(k):
        return STABLE
    exp_side = r < zn_exponential_boundary(k)
    if ordering == "printed":
        exp_side = not exp_side
    elif ordering != "classical":
        raise AnalysisError(f"unknown ordering {ordering!r}")
    return UNSTABLE_EXPONENTIAL if exp_side else UNSTABLE_OSCILLATORY


def zn_boundary_crossing(r, k_bracket=(1.01, 10.0)):
    """The k at which the Hopf boundary passes through a given r."""
    return brentq(lambda k: zn_hopf_boundary(k) - r, *k_bracket)


# ---------------------------------------------------------------------------
# error metrics

def error_metrics(t, T_s, t_ref, T_s_ref, m_final=None, m_ref_final=None):
    """Error metrics between a run and a reference run.

    eps_Ts is the time average of |T_s - T_s,ref| over the overlapping
    span, with both series moved onto a common grid by cubic
    interpolation.  eps_rhou is the RMS over cells of the final-time mass
    flux difference (requires both m arrays on the same mesh).
    rel_err_Ts_final is |T_s - T_s,ref| / |T_s,ref| at the end of the
    overlap.  Returns (eps_Ts, eps_rhou, rel_err_Ts_final); eps_rhou is
    nan when the mass-flux fields are not supplied.
    """
    t = np.asarray(t, dtype=float)
    t_ref = np.asarray(t_ref, dtype=float)
    lo = max(t[0], t_ref[0])
    hi = min(t[-1], t_ref[-1])
    if hi <= lo:
        raise AnalysisError("runs do not overlap in time")

    def on_grid(ts, ys, grid):
        ts, idx = np.unique(ts, return_index=True)
        return CubicSpline(ts, np.asarray(ys, dtype=float)[idx])(grid)

    n = max(len(t), len(t_ref), 200)
    grid = np.linspace(lo, hi, n)
    a = on_grid(t, T_s, grid)
    b = on_grid(t_ref, T_s_ref, grid)
    eps_Ts = float(np.trapezoid(np.abs(a - b), grid) / (hi - lo))
    rel_final = float(abs(a[-1] - b[-1]) / abs(b[-1]))
    if m_final is not None and m_ref_final is not None:
        d = np.asarray(m_final, dtype=float) - np.asarray(m_ref_final, float)
        eps_rhou = float(np.sqrt(np.mean(d * d)))
    else:
        eps_rhou = math.nan
    return eps_Ts, eps_rhou, rel_final


def response_table_csv(samples, path_or_buf):
    """Write (f, gain, phase, Re, Im) rows for a list of ResponseSamples."""
    buf = (path_or_buf if hasattr(path_or_buf, "write")
           else open(path_or_buf, "w"))
    try:
        buf.write("frequency_hz,gain,phase_rad,re,im\n")
        for s in samples:
            buf.write(f"{float(s.frequency)!r},{float(s.gain)!r},"
                      f"{float(s.phase)!r},{float(s.R.real)!r},"
                      f"{float(s.R.imag)!r}\n")
    finally:
        if buf is not path_or_buf:
            buf.close()
