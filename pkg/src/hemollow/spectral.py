"""Frequency-domain and envelope analysis of simulated observables.

Amplitude convention: spectra are one-sided and scaled so a unit sinusoid
sitting on a bin center reads 1.0 with the rect window (DC and Nyquist
carry no mirror image and are not doubled).  Windowed energy is exactly
recoverable from the magnitudes, which is what the Parseval checks lean
on.

The default analysis chain is a Hann window with 4x zero-padding: on a
10 s record the native resolution is 0.1 Hz and sidebands sit within a
hertz of a much stronger center line, so sidelobe suppression matters
more than main-lobe width.  The rect window is kept for bin-centered
diagnostics; its sinc sidelobes sit far above the 5% prominence default,
so triplet extraction on rect spectra of off-bin lines is not meaningful.

Peak positions are refined by a three-point parabola on log magnitude.
Sideband pairs must be symmetric about the measured center; a lone
qualifying peak (the partner may have folded through 0 Hz) is reported
single-sided.  A splitting below half a native bin is never reported as
resolved sidebands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.signal import butter, filtfilt, get_window, peak_prominences

from .errors import ValidationError
from .integrate import Trajectory
from .model import TWO_PI

WINDOWS = ("hann", "rect")
PAD_FACTORS = (1, 2, 4, 8)

_MIN_SAMPLES = 16
# native-bin exclusion zone around the center line when hunting sidebands
_EXCLUSION_BINS = {"hann": 2.0, "rect": 1.0}
# sideband partners must mirror each other about the center this closely
_PAIR_TOL_BINS = 1.25

# A sideband candidate must drop to its saddle by at least this fraction of
# its own height. Shoulders of an unresolved multi-line composite sit on the
# carrier's skirt, so their valley toward the carrier stays shallow and they
# fail this test, while a genuinely resolved line dips close to the noise.
_RESOLVED_FRACTION = 0.5
# the center line must clear the spectral median by this factor
_CENTER_SNR = 10.0


@dataclass(frozen=True)
class ObservableSeries:
    """Uniformly sampled scalar signal starting at t0."""

    t0: float
    dt: float
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or s.size < _MIN_SAMPLES:
            raise ValidationError(
                f"samples must be a 1-d array of at least {_MIN_SAMPLES} values")
        if not np.all(np.isfinite(s)):
            raise ValidationError("samples must be finite")
        object.__setattr__(self, "samples", s)
        if not (math.isfinite(self.t0) and self.t0 >= 0.0):
            raise ValidationError(f"t0 must be finite and non-negative, got {self.t0!r}")
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ValidationError(f"dt must be positive, got {self.dt!r}")

    @property
    def n_samples(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.n_samples * self.dt

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_samples)

    def crop(self, t_lo: float, t_hi: float) -> "ObservableSeries":
        """Samples with t_lo <= t <= t_hi as a new series."""
        eps = 1e-9
        i0 = max(0, int(math.ceil((t_lo - self.t0) / self.dt - eps)))
        i1 = min(self.n_samples - 1,
                 int(math.floor((t_hi - self.t0) / self.dt + eps)))
        if i1 - i0 + 1 < _MIN_SAMPLES:
            raise ValidationError(
                f"crop window [{t_lo}, {t_hi}] keeps fewer than {_MIN_SAMPLES} samples")
        return ObservableSeries(self.t0 + i0 * self.dt, self.dt,
                                self.samples[i0:i1 + 1].copy())


def observable(traj: Trajectory, weight_mu_prime: float = 0.0) -> ObservableSeries:
    """Detector-proxy signal of a trajectory.

    Full model: F_mu,x + weight_mu_prime * F_mu_prime,x (the probe
    addresses the metastables; which hyperfine state dominates is left as
    a sensitivity knob).  Reduced model: I_x, the MEC transfer being
    implicit there.
    """
    if not math.isfinite(weight_mu_prime):
        raise ValidationError("weight_mu_prime must be finite")
    if traj.kind == "reduced":
        sig = traj.states[:, 0]
    else:
        sig = traj.states[:, 3] + weight_mu_prime * traj.states[:, 6]
    return ObservableSeries(traj.t0, traj.dt, sig.copy())


@dataclass(frozen=True)
class Spectrum:
    """One-sided amplitude spectrum on a uniform frequency grid.

    freq_resolution is the bin spacing after zero padding;
    native_resolution = 1/(record length) is what actually limits peak
    separation.  coherent_gain is the window mean, kept so windowed
    energy can be reconstructed from the magnitudes.
    """

    freqs: np.ndarray
    magnitude: np.ndarray
    freq_resolution: float
    native_resolution: float
    window: str
    zero_pad_factor: int
    n_samples: int
    coherent_gain: float

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        m = np.asarray(self.magnitude, dtype=float)
        if f.ndim != 1 or f.shape != m.shape or f.size < 2:
            raise ValidationError("freqs and magnitude must be matching 1-d arrays")
        if f[0] != 0.0 or not np.allclose(np.diff(f), self.freq_resolution,
                                          rtol=1e-9, atol=1e-12):
            raise ValidationError("freqs must run uniformly from 0 to Nyquist")
        if np.any(m < 0.0) or not np.all(np.isfinite(m)):
            raise ValidationError("magnitudes must be finite and non-negative")
        if self.window not in WINDOWS:
            raise ValidationError(f"window must be one of {WINDOWS}")
        if self.zero_pad_factor not in PAD_FACTORS:
            raise ValidationError(f"zero_pad_factor must be one of {PAD_FACTORS}")
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "magnitude", m)

    @property
    def bins(self) -> np.ndarray:
        """(frequency, magnitude) rows."""
        return np.column_stack([self.freqs, self.magnitude])

    def windowed_energy(self) -> float:
        """Sum of squares of the windowed input, recovered via Parseval."""
        sw = self.coherent_gain * self.n_samples
        m_len = self.zero_pad_factor * self.n_samples
        mags = self.magnitude
        e = mags[0] ** 2
        if m_len % 2 == 0:
            e += mags[-1] ** 2
            e += 0.5 * float(np.sum(mags[1:-1] ** 2))
        else:
            e += 0.5 * float(np.sum(mags[1:] ** 2))
        return float(e * sw * sw / m_len)


def power_spectrum(series: ObservableSeries, window: str = "hann",
                   zero_pad_factor: int = 4) -> Spectrum:
    """One-sided amplitude spectrum of a windowed, zero-padded series."""
    if window not in WINDOWS:
        raise ValidationError(f"window must be one of {WINDOWS}, got {window!r}")
    if zero_pad_factor not in PAD_FACTORS:
        raise ValidationError(
            f"zero_pad_factor must be one of {PAD_FACTORS}, got {zero_pad_factor!r}")
    x = series.samples
    n = x.size
    w = np.ones(n) if window == "rect" else get_window("hann", n)
    cg = float(np.mean(w))
    m = n * zero_pad_factor
    spec = np.fft.rfft(x * w, n=m)
    mag = np.abs(spec) * (2.0 / (n * cg))
    mag[0] *= 0.5
    if m % 2 == 0:
        mag[-1] *= 0.5
    freqs = np.fft.rfftfreq(m, series.dt)
    return Spectrum(freqs=freqs, magnitude=mag,
                    freq_resolution=1.0 / (m * series.dt),
                    native_resolution=1.0 / (n * series.dt),
                    window=window, zero_pad_factor=zero_pad_factor,
                    n_samples=n, coherent_gain=cg)


_NAN = float("nan")


@dataclass(frozen=True)
class TripletFeatures:
    """Extracted center line and sideband pair.

    found_mask orders as (center, low sideband, high sideband); fields of
    undetected peaks are NaN and are never fabricated.
    """

    center_freq: float
    sideband_low_freq: float
    sideband_high_freq: float
    center_amp: float
    sideband_low_amp: float
    sideband_high_amp: float
    splitting: float
    found_mask: tuple

    def __post_init__(self):
        mask = tuple(bool(b) for b in self.found_mask)
        if len(mask) != 3:
            raise ValidationError("found_mask must have three entries")
        object.__setattr__(self, "found_mask", mask)
        pairs = ((mask[0], self.center_freq, self.center_amp),
                 (mask[1], self.sideband_low_freq, self.sideband_low_amp),
                 (mask[2], self.sideband_high_freq, self.sideband_high_amp))
        for flag, freq, amp in pairs:
            ok = (math.isfinite(freq) and math.isfinite(amp)) if flag \
                else (math.isnan(freq) and math.isnan(amp))
            if not ok:
                raise ValidationError(
                    "peak fields must be finite when found and NaN when not")
        if all(mask):
            if not (self.sideband_low_freq < self.center_freq < self.sideband_high_freq):
                raise ValidationError("sidebands must straddle the center frequency")
            half = 0.5 * (self.sideband_high_freq - self.sideband_low_freq)
            if not math.isclose(self.splitting, half, rel_tol=1e-9, abs_tol=1e-12):
                raise ValidationError("splitting must be half the sideband separation")


def _unfound() -> TripletFeatures:
    return TripletFeatures(_NAN, _NAN, _NAN, _NAN, _NAN, _NAN, _NAN,
                           (False, False, False))


def _refine_peak(spec: Spectrum, k: int):
    """Sub-bin (freq, amp) by a log-magnitude parabola through bin k."""
    mags = spec.magnitude
    if k <= 0 or k >= mags.size - 1:
        return float(spec.freqs[k]), float(mags[k])
    m0, m1, m2 = mags[k - 1], mags[k], mags[k + 1]
    if min(m0, m1, m2) <= 0.0:
        return float(spec.freqs[k]), float(m1)
    l0, l1, l2 = math.log(m0), math.log(m1), math.log(m2)
    denom = l0 - 2.0 * l1 + l2
    if denom >= -1e-300:
        return float(spec.freqs[k]), float(m1)
    delta = max(-0.5, min(0.5, 0.5 * (l0 - l2) / denom))
    freq = spec.freqs[k] + delta * spec.freq_resolution
    amp = math.exp(l1 - 0.25 * (l0 - l2) * delta)
    return float(freq), float(amp)


def _local_maxima(mags: np.ndarray, threshold: float) -> np.ndarray:
    k = np.arange(1, mags.size - 1)
    keep = (mags[k] > mags[k - 1]) & (mags[k] >= mags[k + 1]) & (mags[k] >= threshold)
    return k[keep]


def extract_triplet(spec: Spectrum, expected_center: float,
                    search_halfwidth: float = 1.0,
                    min_prominence: float = 0.05) -> TripletFeatures:
    """Locate the center line near expected_center and its sideband pair.

    The center must dominate the spectrum (above min_prominence of the
    global maximum and well above the spectral median); without it the
    all-unfound result is returned rather than guessing.  Sidebands are
    local maxima above min_prominence of the center amplitude, outside
    the center's leakage zone, paired by mirror symmetry about the
    center.  Height alone is not enough: a candidate's topographic
    prominence (drop from peak to the saddle toward higher terrain) must
    also clear the same floor and at least half the peak's own height.
    That rejects shoulders of an unresolved line cluster, which ride on
    the carrier's skirt and never dip back down, while keeping resolved
    lines, whose valleys fall near zero.  When only one side qualifies
    (the partner may sit below 0 Hz) it is reported alone with
    splitting = |f_side - f_center|.
    """
    freqs, mags = spec.freqs, spec.magnitude
    if not (0.0 <= expected_center <= freqs[-1]):
        raise ValidationError(
            f"expected_center {expected_center} Hz outside the spectrum range")
    if not (math.isfinite(search_halfwidth) and search_halfwidth > 0.0):
        raise ValidationError("search_halfwidth must be positive")
    if not (0.0 < min_prominence < 1.0):
        raise ValidationError("min_prominence must lie in (0, 1)")

    in_window = np.flatnonzero(np.abs(freqs - expected_center) <= search_halfwidth)
    if in_window.size == 0:
        return _unfound()
    k_c = in_window[np.argmax(mags[in_window])]
    floor = max(_CENTER_SNR * float(np.median(mags)),
                min_prominence * float(np.max(mags)))
    if mags[k_c] <= 0.0 or mags[k_c] < floor:
        return _unfound()
    c_freq, c_amp = _refine_peak(spec, k_c)

    exclusion = _EXCLUSION_BINS[spec.window] * spec.native_resolution
    pair_tol = _PAIR_TOL_BINS * spec.native_resolution
    half_bin = 0.5 * spec.native_resolution
    peaks = _local_maxima(mags, min_prominence * c_amp)
    if peaks.size:
        proms = peak_prominences(mags, peaks)[0]
        resolved = (proms >= min_prominence * c_amp) & \
                   (proms >= _RESOLVED_FRACTION * mags[peaks])
        peaks = peaks[resolved]
    lows = [k for k in peaks if freqs[k] < c_freq - exclusion]
    highs = [k for k in peaks if freqs[k] > c_freq + exclusion]

    best = None
    for kl in lows:
        d_lo = c_freq - freqs[kl]
        for kh in highs:
            if abs((freqs[kh] - c_freq) - d_lo) > pair_tol:
                continue
            score = mags[kl] + mags[kh]
            if best is None or score > best[0]:
                best = (score, kl, kh)
    if best is not None:
        _, kl, kh = best
        lo_f, lo_a = _refine_peak(spec, kl)
        hi_f, hi_a = _refine_peak(spec, kh)
        splitting = 0.5 * (hi_f - lo_f)
        if splitting >= half_bin and lo_f < c_freq < hi_f:
            return TripletFeatures(c_freq, lo_f, hi_f, c_amp, lo_a, hi_a,
                                   splitting, (True, True, True))

    solo = max(list(lows) + list(highs), key=lambda k: mags[k], default=None)
    if solo is not None:
        s_f, s_a = _refine_peak(spec, solo)
        if abs(s_f - c_freq) >= half_bin:
            if s_f < c_freq:
                return TripletFeatures(c_freq, s_f, _NAN, c_amp, s_a, _NAN,
                                       c_freq - s_f, (True, True, False))
            return TripletFeatures(c_freq, _NAN, s_f, c_amp, _NAN, s_a,
                                   s_f - c_freq, (True, False, True))
    return TripletFeatures(c_freq, _NAN, _NAN, c_amp, _NAN, _NAN, _NAN,
                           (True, False, False))


def envelope(series: ObservableSeries, carrier_freq: float) -> ObservableSeries:
    """Slowly varying amplitude of a carrier: demodulate, low-pass, rectify."""
    if not (math.isfinite(carrier_freq) and carrier_freq > 0.0):
        raise ValidationError("carrier_freq must be positive")
    if carrier_freq < 4.0 / series.duration:
        raise ValidationError(
            f"carrier_freq {carrier_freq} Hz too low: at least 4 carrier cycles "
            f"must fit the {series.duration:.3g} s record")
    fs = 1.0 / series.dt
    cutoff = 0.5 * carrier_freq
    if cutoff >= 0.5 * fs:
        raise ValidationError(
            f"carrier_freq {carrier_freq} Hz too close to the {fs} Hz sampling rate")
    z = series.samples * np.exp(-1j * TWO_PI * carrier_freq * series.times())
    b, a = butter(4, cutoff / (0.5 * fs))
    env = 2.0 * np.abs(filtfilt(b, a, z))
    return ObservableSeries(series.t0, series.dt, env)


def modulation_depth(env: ObservableSeries) -> float:
    """(max - min) / (max + min) of a non-negative envelope.

    0 for a flat envelope, approaching 1 when the envelope reaches a null,
    the time-domain signature of strong coherent driving.
    """
    hi = float(env.samples.max())
    lo = float(env.samples.min())
    if lo < 0.0 or hi <= 0.0:
        raise ValidationError(
            "modulation depth is defined for non-negative envelopes")
    return (hi - lo) / (hi + lo)


class DecayFit(NamedTuple):
    amplitude: float
    decay_time: float
    fit_residual: float

    @property
    def decaying(self) -> bool:
        return math.isfinite(self.decay_time)


def fit_decay(env: ObservableSeries, t_start: float = 0.0) -> DecayFit:
    """Least-squares A*exp(-t/T) fit of an envelope after t_start.

    The fit runs in log space, so every sample in range must be positive.
    A non-decaying envelope comes back with decay_time = inf (check the
    `decaying` flag).  fit_residual is the rms log-space misfit.
    """
    t = env.times()
    keep = t >= t_start - 1e-12
    tt, y = t[keep], env.samples[keep]
    if tt.size < 8:
        raise ValidationError("decay fit needs at least 8 samples after t_start")
    if np.any(y <= 0.0):
        raise ValidationError("envelope must be positive over the fit range")
    ly = np.log(y)
    basis = np.column_stack([np.ones_like(tt), tt])
    coef, *_ = np.linalg.lstsq(basis, ly, rcond=None)
    intercept, slope = coef
    resid = float(np.sqrt(np.mean((ly - basis @ coef) ** 2)))
    decay = math.inf if slope >= -1e-12 else -1.0 / slope
    return DecayFit(float(math.exp(intercept)), float(decay), resid)
