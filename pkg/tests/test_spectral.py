"""Spectral-analysis tests: transforms, peak extraction, envelopes, decay fits."""

import math

import numpy as np
import pytest
from scipy.signal import get_window

from hemollow.errors import ValidationError
from hemollow.integrate import IntegrationConfig, Trajectory, integrate_reduced
from hemollow.model import FieldDrive, PhysicalParams
from hemollow.sequence import PulseSequence
from hemollow.spectral import (
    ObservableSeries,
    Spectrum,
    TripletFeatures,
    envelope,
    extract_triplet,
    fit_decay,
    modulation_depth,
    observable,
    power_spectrum,
)

TWO_PI = 2.0 * math.pi


def make_series(samples, dt=0.01, t0=0.0):
    return ObservableSeries(t0=t0, dt=dt, samples=np.asarray(samples, dtype=float))


def tone(freq, amp=1.0, duration=10.0, fs=100.0, phase=0.0):
    t = np.arange(int(round(duration * fs))) / fs
    return make_series(amp * np.cos(TWO_PI * freq * t + phase), dt=1.0 / fs)


def synthetic_triplet(delta, ratio, duration=10.0, fs=100.0, center=4.0, amp=1.0):
    t = np.arange(int(round(duration * fs))) / fs
    x = amp * np.cos(TWO_PI * center * t)
    x += ratio * amp * np.cos(TWO_PI * (center - delta) * t)
    x += ratio * amp * np.cos(TWO_PI * (center + delta) * t)
    return make_series(x, dt=1.0 / fs)


# ----------------------------------------------------------------------
# observable and series plumbing

def test_observable_projections():
    n = 64
    states = np.zeros((n, 9))
    states[:, 3] = np.linspace(0.0, 1.0, n)   # F_mu,x
    states[:, 6] = 2.0                         # F_mu_prime,x
    traj = Trajectory(t0=0.5, dt=0.01, states=states, kind="full")
    s0 = observable(traj, weight_mu_prime=0.0)
    assert s0.t0 == 0.5 and s0.dt == 0.01
    assert np.array_equal(s0.samples, states[:, 3])
    s1 = observable(traj, weight_mu_prime=0.5)
    assert np.allclose(s1.samples, states[:, 3] + 1.0)
    zero = observable(Trajectory(0.0, 0.01, np.zeros((32, 9)), "full"))
    assert not zero.samples.any()


def test_observable_reduced_uses_ground_state():
    states = np.zeros((32, 3))
    states[:, 0] = 7.0
    traj = Trajectory(t0=0.0, dt=0.01, states=states, kind="reduced")
    s = observable(traj)
    assert np.array_equal(s.samples, states[:, 0])


def test_observable_pure_precession_line():
    # reduced free precession at 125 nT reads back as a clean 4 Hz tone
    p = PhysicalParams(gme_g=0.0, gme_mu=0.0, gme_mu_prime=0.0,
                       gamma_relax_g=0.0, gamma_relax_mu=0.0,
                       gamma_relax_mu_prime=0.0, pump_polarization=0.0)
    drive = FieldDrive(125.0, 0.0, 0.0)
    seq = PulseSequence(events=(), total_duration=10.0, drive=drive, pump_value=0.0)
    traj = integrate_reduced(np.array([1.0, 0.0, 0.0]), (0.0, 10.0), p, seq,
                             IntegrationConfig())
    series = observable(traj)
    t = series.times()
    assert np.allclose(series.samples, np.cos(TWO_PI * 4.0 * t), atol=1e-8)
    spec = power_spectrum(series, window="hann", zero_pad_factor=4)
    peak = spec.freqs[np.argmax(spec.magnitude)]
    assert peak == pytest.approx(4.0, abs=spec.freq_resolution)


def test_series_validation_and_crop():
    with pytest.raises(ValidationError):
        make_series(np.ones(15))
    with pytest.raises(ValidationError):
        make_series([np.nan] * 20)
    with pytest.raises(ValidationError):
        ObservableSeries(t0=0.0, dt=0.0, samples=np.ones(32))
    s = make_series(np.arange(1000.0), dt=0.01)
    c = s.crop(2.0, 8.0)
    assert c.t0 == pytest.approx(2.0)
    assert c.n_samples == 601
    assert c.samples[0] == pytest.approx(200.0)
    assert c.samples[-1] == pytest.approx(800.0)
    with pytest.raises(ValidationError):
        s.crop(9.99, 9.995)  # too few samples left


# ----------------------------------------------------------------------
# power_spectrum

def test_spectrum_constant_series():
    s = make_series(np.full(1000, 0.5))
    spec = power_spectrum(s, window="rect", zero_pad_factor=1)
    assert spec.magnitude[0] == pytest.approx(0.5, rel=1e-12)
    assert np.all(spec.magnitude[1:] < 1e-12)


def test_spectrum_bin_centered_sinusoid():
    spec = power_spectrum(tone(4.0), window="rect", zero_pad_factor=1)
    k = int(round(4.0 / spec.freq_resolution))
    assert spec.freqs[k] == pytest.approx(4.0)
    assert spec.magnitude[k] == pytest.approx(1.0, rel=1e-9)
    others = np.delete(spec.magnitude, k)
    assert np.all(others < 1e-9)


def test_spectrum_triplet_linearity():
    # 25 s record puts 2.88, 4.00 and 5.12 Hz all at bin centers
    s = synthetic_triplet(delta=1.12, ratio=0.3, duration=25.0)
    spec = power_spectrum(s, window="rect", zero_pad_factor=1)
    for f, a in ((2.88, 0.3), (4.0, 1.0), (5.12, 0.3)):
        k = int(round(f / spec.freq_resolution))
        assert spec.magnitude[k] == pytest.approx(a, rel=1e-9), f


def test_spectrum_grid_invariants():
    s = tone(4.0, duration=10.0)
    for pad in (1, 2, 4, 8):
        spec = power_spectrum(s, window="hann", zero_pad_factor=pad)
        assert spec.freqs[0] == 0.0
        assert spec.freqs[-1] == pytest.approx(50.0)
        assert np.allclose(np.diff(spec.freqs), spec.freq_resolution)
        assert spec.freq_resolution == pytest.approx(0.1 / pad)
        assert spec.native_resolution == pytest.approx(0.1)
        assert np.all(spec.magnitude >= 0.0)
        assert len(spec.bins) == len(spec.freqs)


def test_spectrum_parseval():
    rng = np.random.default_rng(7)
    x = rng.standard_normal(1000)
    s = make_series(x)
    for window in ("rect", "hann"):
        w = np.ones(1000) if window == "rect" else get_window("hann", 1000)
        e_time = float(np.sum((x * w) ** 2))
        for pad in (1, 2, 4, 8):
            spec = power_spectrum(s, window=window, zero_pad_factor=pad)
            gap = abs(spec.windowed_energy() - e_time) / e_time
            assert gap < 1e-9, (window, pad, gap)


def test_spectrum_argument_validation():
    s = tone(4.0)
    with pytest.raises(ValidationError):
        power_spectrum(s, window="hamming", zero_pad_factor=1)
    with pytest.raises(ValidationError):
        power_spectrum(s, window="hann", zero_pad_factor=3)


# ----------------------------------------------------------------------
# extract_triplet

def test_extract_synthetic_triplet():
    s = synthetic_triplet(delta=1.12, ratio=0.3)
    spec = power_spectrum(s, window="hann", zero_pad_factor=4)
    feats = extract_triplet(spec, expected_center=4.0, search_halfwidth=0.5,
                            min_prominence=0.05)
    assert feats.found_mask == (True, True, True)
    assert feats.center_freq == pytest.approx(4.0, abs=spec.native_resolution)
    assert feats.sideband_low_freq == pytest.approx(2.88, abs=spec.native_resolution)
    assert feats.sideband_high_freq == pytest.approx(5.12, abs=spec.native_resolution)
    assert feats.sideband_low_freq < feats.center_freq < feats.sideband_high_freq
    assert feats.splitting == pytest.approx(
        (feats.sideband_high_freq - feats.sideband_low_freq) / 2.0)
    assert feats.splitting == pytest.approx(1.12, abs=0.05)
    assert feats.center_amp == pytest.approx(1.0, rel=0.1)
    assert feats.sideband_low_amp == pytest.approx(0.3, rel=0.15)
    assert feats.sideband_high_amp == pytest.approx(0.3, rel=0.15)


def test_extract_single_line_leaves_sidebands_unfound():
    spec = power_spectrum(tone(4.0), window="hann", zero_pad_factor=4)
    feats = extract_triplet(spec, expected_center=4.0, search_halfwidth=0.5,
                            min_prominence=0.05)
    assert feats.found_mask == (True, False, False)
    assert feats.center_freq == pytest.approx(4.0, abs=0.05)
    assert math.isnan(feats.splitting)
    assert math.isnan(feats.sideband_low_freq)
    assert math.isnan(feats.sideband_high_amp)


def test_extract_noise_floor_all_unfound():
    rng = np.random.default_rng(21)
    s = make_series(0.1 * rng.standard_normal(1000))
    spec = power_spectrum(s, window="hann", zero_pad_factor=4)
    feats = extract_triplet(spec, expected_center=4.0, search_halfwidth=0.5,
                            min_prominence=0.05)
    assert feats.found_mask == (False, False, False)
    assert math.isnan(feats.center_freq)
    assert math.isnan(feats.center_amp)


def test_extract_scale_covariance():
    s = synthetic_triplet(delta=1.12, ratio=0.3)
    scaled = make_series(3.7 * s.samples, dt=s.dt)
    a = extract_triplet(power_spectrum(s, "hann", 4), 4.0, 0.5, 0.05)
    b = extract_triplet(power_spectrum(scaled, "hann", 4), 4.0, 0.5, 0.05)
    assert b.found_mask == a.found_mask
    assert b.center_freq == pytest.approx(a.center_freq, abs=1e-12)
    assert b.sideband_low_freq == pytest.approx(a.sideband_low_freq, abs=1e-12)
    assert b.center_amp == pytest.approx(3.7 * a.center_amp, rel=1e-9)
    assert b.sideband_high_amp == pytest.approx(3.7 * a.sideband_high_amp, rel=1e-9)


def test_extract_resolution_honesty():
    # splitting below half a native bin must not be reported as resolved
    s = synthetic_triplet(delta=0.03, ratio=0.5)
    spec = power_spectrum(s, window="hann", zero_pad_factor=4)
    feats = extract_triplet(spec, 4.0, 0.5, 0.05)
    if feats.found_mask[1] and feats.found_mask[2]:
        assert feats.splitting >= 0.5 * spec.native_resolution


def test_extract_round_trip_grid():
    for delta in (0.63, 1.12, 1.9, 2.37):
        for ratio in (0.2, 0.5, 1.0):
            s = synthetic_triplet(delta=delta, ratio=ratio)
            spec = power_spectrum(s, window="hann", zero_pad_factor=4)
            feats = extract_triplet(spec, 4.0, 0.5, 0.05)
            assert feats.found_mask == (True, True, True), (delta, ratio)
            tol = max(0.5 * spec.native_resolution, 0.01 * delta)
            assert abs(feats.splitting - delta) < tol, (delta, ratio)


def test_extract_expected_center_out_of_range():
    spec = power_spectrum(tone(4.0), window="hann", zero_pad_factor=4)
    with pytest.raises(ValidationError):
        extract_triplet(spec, expected_center=80.0, search_halfwidth=0.5)


# ----------------------------------------------------------------------
# envelope and decay fitting

def test_envelope_constant_amplitude():
    s = tone(4.0, amp=0.7)
    env = envelope(s, carrier_freq=4.0)
    assert env.dt == s.dt and env.t0 == s.t0
    t = env.times()
    inner = (t > 1.0) & (t < 9.0)
    assert np.max(np.abs(env.samples[inner] - 0.7)) < 0.007


def test_envelope_decaying_sinusoid():
    t = np.arange(1000) / 100.0
    s = make_series(np.exp(-t / 2.0) * np.cos(TWO_PI * 4.0 * t))
    env = envelope(s, carrier_freq=4.0)
    inner = (t > 1.5) & (t < 8.5)
    rel = np.abs(env.samples[inner] - np.exp(-t[inner] / 2.0)) / np.exp(-t[inner] / 2.0)
    assert np.max(rel) < 0.02


def test_envelope_carrier_too_low():
    s = tone(4.0, duration=10.0)
    with pytest.raises(ValidationError):
        envelope(s, carrier_freq=0.3)  # < 4 cycles in the record


def test_modulation_depth_limits():
    flat = make_series(np.full(200, 0.3))
    assert modulation_depth(flat) == 0.0
    t = np.arange(1000) / 100.0
    beating = make_series(np.abs(np.sin(TWO_PI * 0.2 * t)))
    assert modulation_depth(beating) > 0.99
    with pytest.raises(ValidationError):
        modulation_depth(make_series(np.linspace(-0.1, 1.0, 100)))


def test_fit_decay_exact_exponential():
    t = np.arange(1000) / 100.0
    env = make_series(np.exp(-t / 2.0))
    fit = fit_decay(env, t_start=0.0)
    assert fit.decay_time == pytest.approx(2.0, rel=1e-9)
    assert fit.amplitude == pytest.approx(1.0, rel=1e-9)
    assert fit.fit_residual < 1e-12


def test_fit_decay_constant_is_infinite():
    env = make_series(np.full(100, 0.42))
    fit = fit_decay(env, t_start=0.0)
    assert math.isinf(fit.decay_time)
    assert fit.amplitude == pytest.approx(0.42)


def test_fit_decay_validation():
    env = make_series(np.linspace(1.0, 0.5, 16), dt=0.1)
    with pytest.raises(ValidationError):
        fit_decay(env, t_start=1.0)  # fewer than 8 points remain
    bad = make_series(np.concatenate([np.ones(30), [0.0], np.ones(9)]), dt=0.1)
    with pytest.raises(ValidationError):
        fit_decay(bad, t_start=0.0)


def test_free_decay_reads_back_coherence_time():
    # transverse ground-state decay at 0.5 1/s shows up as a 2 s envelope time
    p = PhysicalParams()
    drive = FieldDrive(125.0, 0.0, 0.0)
    seq = PulseSequence(events=(), total_duration=10.0, drive=drive, pump_value=0.0)
    traj = integrate_reduced(np.array([2.0e-4, 0.0, 0.0]), (0.0, 10.0), p, seq,
                             IntegrationConfig())
    env = envelope(observable(traj), carrier_freq=4.0)
    fit = fit_decay(env, t_start=1.0)
    assert fit.decay_time == pytest.approx(2.0, abs=0.1)
