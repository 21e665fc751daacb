"""Parameter sweeps over the simulate / analyze pipeline.

Each sweep point runs the same chain: equilibrate under the quiet field,
integrate the pulse protocol, project the detector observable, window it to
the drive pulse, and extract triplet features from the amplitude spectrum.
Sweeps only vary one knob (drive amplitude or drive frequency) and collect
the per-point spectra and features side by side, so the fitting helpers can
check the dressed-state laws against what the pipeline actually measured
rather than against analytic shortcuts.

Sweep points are independent; `workers` > 1 evaluates them in a thread pool
with results assembled back in axis order. Every step downstream of the
integrator is deterministic, so repeated sweeps with identical inputs give
bit-identical feature tables.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ValidationError
from .integrate import (
    IntegrationConfig,
    Trajectory,
    integrate_full,
    integrate_reduced,
    steady_state,
    steady_state_reduced,
)
from .model import (
    FieldDrive,
    PhysicalParams,
    larmor_frequency,
    rabi_frequency,
    rotate_state,
)
from .sequence import PulseSequence, standard_pulse
from .spectral import (
    WINDOWS,
    ObservableSeries,
    Spectrum,
    TripletFeatures,
    extract_triplet,
    observable,
    power_spectrum,
)

MODELS = ("full", "reduced")

# Bins within this many native resolution widths of the expected carrier are
# treated as carrier leakage when ranking sideband magnitudes (matches the
# Hann-window exclusion used by the feature extractor).
_CARRIER_EXCLUSION_BINS = 2.0


@dataclass(frozen=True)
class AnalysisOptions:
    """Spectral-analysis knobs shared by every sweep point."""

    window: str = "hann"
    zero_pad_factor: int = 4
    min_prominence: float = 0.05
    search_halfwidth: float = 0.5
    weight_mu_prime: float = 0.0

    def __post_init__(self):
        if self.window not in WINDOWS:
            raise ValidationError(f"window must be one of {WINDOWS}")
        if self.zero_pad_factor not in (1, 2, 4, 8):
            raise ValidationError("zero_pad_factor must be 1, 2, 4 or 8")
        if not 0.0 < self.min_prominence < 1.0:
            raise ValidationError("min_prominence must lie in (0, 1)")
        if self.search_halfwidth <= 0.0:
            raise ValidationError("search_halfwidth must be positive")


class PointResult(NamedTuple):
    trajectory: Trajectory
    series: ObservableSeries
    spectrum: Spectrum
    features: TripletFeatures


@dataclass(frozen=True)
class SweepResult:
    """Aligned per-point outputs of a one-dimensional sweep."""

    axis_values: tuple
    spectra: tuple
    features: tuple

    def __post_init__(self):
        axis = tuple(float(v) for v in self.axis_values)
        if len(axis) == 0:
            raise ValidationError("sweep needs at least one axis value")
        if any(not math.isfinite(v) for v in axis):
            raise ValidationError("axis values must be finite")
        if any(b <= a for a, b in zip(axis[:-1], axis[1:])):
            raise ValidationError("axis values must be strictly increasing")
        if not (len(axis) == len(self.spectra) == len(self.features)):
            raise ValidationError(
                "axis_values, spectra and features must have equal lengths")
        object.__setattr__(self, "axis_values", axis)
        object.__setattr__(self, "spectra", tuple(self.spectra))
        object.__setattr__(self, "features", tuple(self.features))

    def __len__(self):
        return len(self.axis_values)


class RabiFit(NamedTuple):
    slope: float         # Hz per nT of drive amplitude
    intercept: float     # Hz
    r_squared: float
    n_points: int
    degenerate: bool


class DetuningLaw(NamedTuple):
    rms_rel_error: float
    n_points: int
    drive_freqs: tuple   # Hz, points where a splitting was measured
    predicted: tuple     # Hz, sqrt(detuning^2 + rabi^2) at those points
    measured: tuple      # Hz


class PumpComparison(NamedTuple):
    continuous: TripletFeatures
    gated: TripletFeatures
    continuous_ratio: float
    gated_ratio: float
    continuous_spectrum: Spectrum
    gated_spectrum: Spectrum


def _drive_active(sequence: PulseSequence) -> bool:
    return sequence.drive.b_osc != 0.0 and sequence.drive_window() is not None


def run_single(params: PhysicalParams, drive: FieldDrive,
               sequence: PulseSequence, *, model: str = "reduced",
               config: IntegrationConfig | None = None,
               analysis: AnalysisOptions | None = None,
               initial: str = "auto", state0=None,
               denominator: str = "mu") -> PointResult:
    """One pass of the simulate / observe / analyze chain.

    The start state is the pumped quiet-field equilibrium (the long history
    before the protocol, regardless of any shutter event at t = 0). With no
    active drive there is nothing transverse to observe, so `initial="auto"`
    tips that equilibrium 90 degrees about y to expose free precession;
    "steady" and "tipped" force either choice, and `state0` overrides both.
    The spectrum is taken over the drive window when one exists, otherwise
    over the whole record, and the triplet search is centered on the drive
    frequency (or the precession frequency when the drive is off).
    """
    if model not in MODELS:
        raise ValidationError(f"model must be one of {MODELS}, got {model!r}")
    if initial not in ("auto", "steady", "tipped"):
        raise ValidationError("initial must be 'auto', 'steady' or 'tipped'")
    config = config if config is not None else IntegrationConfig()
    analysis = analysis if analysis is not None else AnalysisOptions()

    active = _drive_active(sequence)
    tip = initial == "tipped" or (initial == "auto" and not active)
    quiet = drive.replace(b_osc=0.0)
    if state0 is None:
        if model == "full":
            state0 = steady_state(params, quiet, pump=sequence.pump_value)
            if tip:
                state0 = rotate_state(state0, axis="y",
                                      angle_rad=0.5 * math.pi)
        else:
            vec = steady_state_reduced(params, quiet,
                                       pump=sequence.pump_value,
                                       denominator=denominator)
            if tip:
                vec = np.array([vec[2], vec[1], -vec[0]])
            state0 = vec

    span = (0.0, sequence.total_duration)
    if model == "full":
        traj = integrate_full(state0, span, params, sequence, config)
    else:
        traj = integrate_reduced(state0, span, params, sequence, config,
                                 denominator=denominator)

    series = observable(traj, analysis.weight_mu_prime)
    window = sequence.drive_window()
    if window is not None:
        series = series.crop(window[0], window[1])
    spectrum = power_spectrum(series, window=analysis.window,
                              zero_pad_factor=analysis.zero_pad_factor)
    if active:
        expected = drive.drive_freq
    else:
        expected = larmor_frequency(params, drive.b_static)
    features = extract_triplet(spectrum, expected,
                               search_halfwidth=analysis.search_halfwidth,
                               min_prominence=analysis.min_prominence)
    return PointResult(traj, series, spectrum, features)


def _collect(jobs, workers: int) -> list:
    if workers <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: job(), jobs))


def run_regimes(b_m_list, params: PhysicalParams, *,
                drive: FieldDrive | None = None, pulse_length: float = 10.0,
                pump_mode: str = "continuous", pump_value: float | None = None,
                model: str = "reduced",
                config: IntegrationConfig | None = None,
                analysis: AnalysisOptions | None = None,
                workers: int = 1) -> SweepResult:
    """Sweep the drive amplitude at fixed, resonant drive frequency.

    `drive` supplies the static field and drive frequency (its b_osc is
    replaced per point); by default the drive sits exactly on the precession
    frequency of a 125 nT static field. A detuned base drive is rejected,
    since off resonance the splitting no longer reads back the drive
    amplitude alone.
    """
    if drive is None:
        drive = FieldDrive(125.0, 0.0, larmor_frequency(params, 125.0))
    f_prec = larmor_frequency(params, drive.b_static)
    if abs(drive.drive_freq - f_prec) > 1e-6 * max(1.0, f_prec):
        raise ValidationError(
            "amplitude sweep requires a resonant drive: drive_freq "
            f"{drive.drive_freq} Hz vs precession {f_prec} Hz")
    values = [float(b) for b in b_m_list]
    if any(b < 0.0 for b in values):
        raise ValidationError("drive amplitudes must be non-negative")
    pv = params.pump_polarization if pump_value is None else pump_value

    def job_for(b):
        point_drive = drive.replace(b_osc=b)
        seq = standard_pulse(0.0, pulse_length, 0.0, point_drive,
                             pump_mode, pump_value=pv)
        return lambda: run_single(params, point_drive, seq, model=model,
                                  config=config, analysis=analysis)

    points = _collect([job_for(b) for b in values], workers)
    return SweepResult(axis_values=tuple(values),
                       spectra=tuple(p.spectrum for p in points),
                       features=tuple(p.features for p in points))


def run_detuning_sweep(freq_list, params: PhysicalParams, *,
                       b_osc: float = 70.0, b_static: float = 125.0,
                       pulse_length: float = 10.0,
                       pump_mode: str = "continuous",
                       pump_value: float | None = None,
                       model: str = "reduced",
                       config: IntegrationConfig | None = None,
                       analysis: AnalysisOptions | None = None,
                       workers: int = 1) -> SweepResult:
    """Sweep the drive frequency at fixed drive amplitude."""
    freqs = [float(f) for f in freq_list]
    if any(f <= 0.0 for f in freqs):
        raise ValidationError("drive frequencies must be positive")
    if b_osc <= 0.0:
        raise ValidationError("detuning sweep needs a positive drive amplitude")
    pv = params.pump_polarization if pump_value is None else pump_value

    def job_for(f):
        point_drive = FieldDrive(b_static, b_osc, f)
        seq = standard_pulse(0.0, pulse_length, 0.0, point_drive,
                             pump_mode, pump_value=pv)
        return lambda: run_single(params, point_drive, seq, model=model,
                                  config=config, analysis=analysis)

    points = _collect([job_for(f) for f in freqs], workers)
    return SweepResult(axis_values=tuple(freqs),
                       spectra=tuple(p.spectrum for p in points),
                       features=tuple(p.features for p in points))


def fit_rabi_linearity(sweep: SweepResult) -> RabiFit:
    """Least-squares line through (drive amplitude, measured splitting).

    Only points with at least one found sideband carry a splitting and enter
    the fit. A flat set of splittings has no variance to explain; the fit is
    then reported with slope 0, r^2 = 0 and the degenerate flag set.
    """
    xs, ys = [], []
    for b, feats in zip(sweep.axis_values, sweep.features):
        if math.isfinite(feats.splitting):
            xs.append(b)
            ys.append(feats.splitting)
    if len(xs) < 4:
        raise ValidationError(
            f"linearity fit needs at least 4 points with measured "
            f"splittings, got {len(xs)}")
    x = np.asarray(xs)
    y = np.asarray(ys)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot <= 1e-30 * max(1.0, float(y.mean()) ** 2):
        return RabiFit(0.0, float(y.mean()), 0.0, len(xs), True)
    coeffs, residuals, _, _ = np.linalg.lstsq(
        np.column_stack([x, np.ones_like(x)]), y, rcond=None)
    ss_res = float(residuals[0]) if residuals.size else float(
        np.sum((y - coeffs[0] * x - coeffs[1]) ** 2))
    r2 = 1.0 - ss_res / ss_tot
    return RabiFit(float(coeffs[0]), float(coeffs[1]), r2, len(xs), False)


def detuning_law_error(sweep: SweepResult, params: PhysicalParams,
                       b_osc: float, b_static: float = 125.0) -> DetuningLaw:
    """Compare measured splittings against sqrt(detuning^2 + rabi^2).

    Points without a measured splitting (near |detuning| = rabi the sidebands
    can drop below prominence) are skipped; the RMS relative error runs over
    the points that were measured.
    """
    f_prec = larmor_frequency(params, b_static)
    rabi = rabi_frequency(params, b_osc)
    freqs, pred, meas = [], [], []
    for f, feats in zip(sweep.axis_values, sweep.features):
        if not math.isfinite(feats.splitting):
            continue
        freqs.append(f)
        pred.append(math.hypot(f_prec - f, rabi))
        meas.append(feats.splitting)
    if not freqs:
        raise ValidationError("no sweep point yielded a measured splitting")
    rel = (np.asarray(meas) - np.asarray(pred)) / np.asarray(pred)
    rms = float(np.sqrt(np.mean(rel ** 2)))
    return DetuningLaw(rms, len(freqs), tuple(freqs), tuple(pred), tuple(meas))


def center_sideband_ratio(spec: Spectrum, expected_center: float) -> float:
    """Carrier-to-sideband magnitude ratio, independent of peak detection.

    The carrier magnitude is read directly off the spectrum (maximum within
    one native bin of the expected center), so a carrier suppressed below the
    detection floor still gets a number instead of NaN. The sideband reference
    is the strongest bin outside the carrier's leakage zone and away from DC.
    """
    native = spec.native_resolution
    offset = np.abs(spec.freqs - expected_center)
    carrier_zone = offset <= native
    if not carrier_zone.any():
        raise ValidationError("expected_center lies outside the spectrum")
    side_zone = (offset >= _CARRIER_EXCLUSION_BINS * native) & (
        spec.freqs >= 2.0 * native)
    if not side_zone.any():
        raise ValidationError("spectrum too narrow to rank sidebands")
    carrier = float(spec.magnitude[carrier_zone].max())
    side = float(spec.magnitude[side_zone].max())
    if side <= 0.0:
        return math.inf if carrier > 0.0 else math.nan
    return carrier / side


def run_pump_comparison(params: PhysicalParams, drive: FieldDrive, *,
                        pulse_length: float = 10.0,
                        pump_value: float | None = None,
                        model: str = "reduced",
                        config: IntegrationConfig | None = None,
                        analysis: AnalysisOptions | None = None
                        ) -> PumpComparison:
    """Identical protocol with the pump held on versus gated off while driven.

    Gating removes the source feeding the longitudinal component during the
    pulse, which starves the carrier line while leaving the sidebands, so the
    gated center-to-sideband ratio collapses relative to the continuous one.
    """
    pv = params.pump_polarization if pump_value is None else pump_value
    results = {}
    for mode in ("continuous", "gated-off-during-drive"):
        seq = standard_pulse(0.0, pulse_length, 0.0, drive, mode,
                             pump_value=pv)
        point = run_single(params, drive, seq, model=model, config=config,
                           analysis=analysis)
        if _drive_active(seq):
            expected = drive.drive_freq
        else:
            expected = larmor_frequency(params, drive.b_static)
        ratio = center_sideband_ratio(point.spectrum, expected)
        results[mode] = (point, ratio)
    cont, cont_ratio = results["continuous"]
    gated, gated_ratio = results["gated-off-during-drive"]
    return PumpComparison(cont.features, gated.features, cont_ratio,
                          gated_ratio, cont.spectrum, gated.spectrum)
