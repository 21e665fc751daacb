"""Coupled ground/metastable spin model for helium-3 in a driven magnetic field.

The model couples the ground-state angular momentum I to the two metastable
sublevels F_mu (F = 1/2) and F_mu_prime (F = 3/2) through metastability
exchange collisions, with optical pumping acting on F_mu and independent
relaxation on each species. A static field B0 sits along z and an oscillating
drive B_M cos(2 pi f t + phase) along y.

Unit conventions used everywhere in this package:

* gyromagnetic ratios are stored in Hz per gauss; precession terms convert
  to angular rates as 2*pi*gamma*B (rad/s),
* exchange and relaxation rates are plain exponential rates in 1/s (no 2*pi),
* field amplitudes in the public types are nanotesla and are converted
  internally with 1 G = 1e5 nT,
* all reported frequencies (Larmor, Rabi, splittings, spectra) are in Hz.

The right-hand sides are affine in the state: dx/dt = A(t) x + c. The matrix
builders used by the integrators are exposed alongside the plain rhs
functions so the two can be cross-checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import NonFiniteStateError, ValidationError

GAUSS_PER_NANOTESLA = 1e-5
TWO_PI = 2.0 * math.pi

# Exchange-collision coupling coefficients. Row = receiving species
# (I, F_mu, F_mu_prime), column = contributing species, each scaled by the
# receiver's exchange rate. These rationals are part of the model definition
# and are asserted verbatim by the test suite; do not "simplify" them.
MEC_COEFFS = np.array([
    [-1.0,       -1.0 / 3.0,  1.0 / 3.0],
    [-1.0 / 9.0, -7.0 / 9.0,  1.0 / 9.0],
    [10.0 / 9.0, 10.0 / 9.0, -4.0 / 9.0],
])

_SPECIES = ("ground", "mu", "mu_prime")


@dataclass(frozen=True)
class PhysicalParams:
    """Rates and ratios of the three-species exchange model.

    Defaults reproduce the reference parameter set used throughout:
    gamma_g = 3200 Hz/G, gamma_mu = 3.8e6 Hz/G, gamma_mu_prime = 1.9e6 Hz/G,
    exchange rates (1, 1e6, 1e6) 1/s, relaxation (0.5, 1e3, 1e3) 1/s and
    pump polarization P = 0.1.
    """

    gamma_g: float = 3200.0
    gamma_mu: float = 3.8e6
    gamma_mu_prime: float = 1.9e6
    gme_g: float = 1.0
    gme_mu: float = 1.0e6
    gme_mu_prime: float = 1.0e6
    gamma_relax_g: float = 0.5
    gamma_relax_mu: float = 1.0e3
    gamma_relax_mu_prime: float = 1.0e3
    pump_polarization: float = 0.1

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValidationError(f"{f.name} must be a finite number, got {v!r}")
        for name in ("gamma_g", "gamma_mu", "gamma_mu_prime"):
            if getattr(self, name) <= 0.0:
                raise ValidationError(f"{name} must be strictly positive")
        # zero rates are legal (they select degenerate test configurations);
        # negative rates are not
        for name in ("gme_g", "gme_mu", "gme_mu_prime", "gamma_relax_g",
                     "gamma_relax_mu", "gamma_relax_mu_prime"):
            if getattr(self, name) < 0.0:
                raise ValidationError(f"{name} must be non-negative")
        if not 0.0 <= self.pump_polarization <= 1.0:
            raise ValidationError("pump_polarization must lie in [0, 1]")

    def gyro(self, species: str) -> float:
        """Gyromagnetic ratio in Hz/G for 'ground', 'mu' or 'mu_prime'."""
        if species not in _SPECIES:
            raise ValidationError(f"unknown species {species!r}")
        return {"ground": self.gamma_g, "mu": self.gamma_mu,
                "mu_prime": self.gamma_mu_prime}[species]

    def reduced_pump_rate(self, denominator: str = "mu") -> float:
        """Compound pump rate of the ground-state-only model, 1/s.

        gme_g * gamma_relax_mu / gme_mu (or gme_mu_prime, selectable because
        the two exchange rates are interchangeable in the adiabatic
        elimination when they are equal, which they are by default).
        """
        if denominator == "mu":
            d = self.gme_mu
        elif denominator == "mu_prime":
            d = self.gme_mu_prime
        else:
            raise ValidationError(
                f"denominator must be 'mu' or 'mu_prime', got {denominator!r}")
        if d == 0.0:
            raise ValidationError("compound pump rate undefined for zero exchange rate")
        return self.gme_g * self.gamma_relax_mu / d


@dataclass(frozen=True)
class FieldDrive:
    """Static field along z plus an oscillating drive along y.

    b_static, b_osc are amplitudes in nanotesla; drive_freq in Hz; phase in
    radians. The drive field is b_osc * cos(2 pi drive_freq t + phase).
    """

    b_static: float
    b_osc: float
    drive_freq: float
    phase: float = 0.0

    def __post_init__(self):
        for name in ("b_static", "b_osc", "drive_freq", "phase"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValidationError(f"{name} must be a finite number, got {v!r}")
        for name in ("b_static", "b_osc", "drive_freq"):
            if getattr(self, name) < 0.0:
                raise ValidationError(f"{name} must be non-negative")

    def replace(self, **kw) -> "FieldDrive":
        d = {"b_static": self.b_static, "b_osc": self.b_osc,
             "drive_freq": self.drive_freq, "phase": self.phase}
        d.update(kw)
        return FieldDrive(**d)


def field_at(drive: FieldDrive, t):
    """Magnetic field vector in gauss at time(s) t.

    Scalar t gives shape (3,); an array of times gives shape t.shape + (3,).
    """
    b_z = drive.b_static * GAUSS_PER_NANOTESLA
    b_y = drive.b_osc * GAUSS_PER_NANOTESLA
    t = np.asarray(t, dtype=float)
    osc = b_y * np.cos(TWO_PI * drive.drive_freq * t + drive.phase)
    out = np.zeros(t.shape + (3,))
    out[..., 1] = osc
    out[..., 2] = b_z
    return out


@dataclass(frozen=True)
class SpinState:
    """Angular-momentum expectation values of the three species."""

    i_vec: np.ndarray
    f_mu: np.ndarray
    f_mu_prime: np.ndarray

    def __post_init__(self):
        for name in ("i_vec", "f_mu", "f_mu_prime"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,):
                raise ValidationError(f"{name} must be a 3-vector")
            object.__setattr__(self, name, v)

    @classmethod
    def zero(cls) -> "SpinState":
        return cls(np.zeros(3), np.zeros(3), np.zeros(3))

    @classmethod
    def from_array(cls, x) -> "SpinState":
        x = np.asarray(x, dtype=float)
        if x.shape != (9,):
            raise ValidationError("state array must have 9 components")
        return cls(x[0:3].copy(), x[3:6].copy(), x[6:9].copy())

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.i_vec, self.f_mu, self.f_mu_prime])

    def require_finite(self, context: str = "state"):
        x = self.to_array()
        if not np.all(np.isfinite(x)):
            raise NonFiniteStateError(f"non-finite {context}: {x}")
        return self


def _cross_matrix(w: np.ndarray) -> np.ndarray:
    """Matrix K with K @ x = w x x."""
    return np.array([[0.0, -w[2], w[1]],
                     [w[2], 0.0, -w[0]],
                     [-w[1], w[0], 0.0]])


def full_system_matrices(params: PhysicalParams, b_gauss: np.ndarray,
                         pump: float):
    """Affine form dx/dt = A x + c of the full 9-dimensional system.

    b_gauss is the instantaneous field vector in gauss; pump is the effective
    polarization P fed to F_mu (0 when the pump beam is gated off).
    """
    a = np.zeros((9, 9))
    gyros = (params.gamma_g, params.gamma_mu, params.gamma_mu_prime)
    exch = (params.gme_g, params.gme_mu, params.gme_mu_prime)
    relax = (params.gamma_relax_g, params.gamma_relax_mu,
             params.gamma_relax_mu_prime)
    eye = np.eye(3)
    for i in range(3):
        sl_i = slice(3 * i, 3 * i + 3)
        a[sl_i, sl_i] += _cross_matrix(TWO_PI * gyros[i] * b_gauss)
        a[sl_i, sl_i] -= relax[i] * eye
        for j in range(3):
            sl_j = slice(3 * j, 3 * j + 3)
            a[sl_i, sl_j] += exch[i] * MEC_COEFFS[i, j] * eye
    c = np.zeros(9)
    c[5] = params.gamma_relax_mu * pump  # pump feeds F_mu along z
    return a, c


def reduced_system_matrices(params: PhysicalParams, b_gauss: np.ndarray,
                            pump: float, denominator: str = "mu"):
    """Affine form of the ground-state-only model.

    The metastables are adiabatically eliminated: their net effect is a
    constant polarization source along z at the compound pump rate, plus the
    ground state's own precession and relaxation.
    """
    a = _cross_matrix(TWO_PI * params.gamma_g * b_gauss)
    a -= params.gamma_relax_g * np.eye(3)
    source = params.reduced_pump_rate(denominator) * pump if pump != 0.0 else 0.0
    c = np.array([0.0, 0.0, source])
    return a, c


def rhs_full(state: SpinState, t: float, params: PhysicalParams,
             drive: FieldDrive, pump: float | None = None) -> SpinState:
    """Time derivative of the full coupled system at time t.

    pump overrides params.pump_polarization when given (the sequencer uses
    this to gate the pump beam).
    """
    state.require_finite("state passed to rhs_full")
    p = params.pump_polarization if pump is None else pump
    a, c = full_system_matrices(params, field_at(drive, t), p)
    return SpinState.from_array(a @ state.to_array() + c)


def rhs_reduced(i_vec, t: float, params: PhysicalParams, drive: FieldDrive,
                pump: float | None = None, denominator: str = "mu") -> np.ndarray:
    """Time derivative of the ground-state-only model at time t."""
    x = np.asarray(i_vec, dtype=float)
    if x.shape != (3,):
        raise ValidationError("i_vec must be a 3-vector")
    if not np.all(np.isfinite(x)):
        raise NonFiniteStateError(f"non-finite state passed to rhs_reduced: {x}")
    p = params.pump_polarization if pump is None else pump
    a, c = reduced_system_matrices(params, field_at(drive, t), p, denominator)
    return a @ x + c


# ----------------------------------------------------------------------
# dressed-state bookkeeping

def larmor_frequency(params: PhysicalParams, b_static: float,
                     species: str = "ground") -> float:
    """Precession frequency in Hz of the given species in b_static (nT)."""
    if b_static < 0.0:
        raise ValidationError("b_static must be non-negative")
    return params.gyro(species) * b_static * GAUSS_PER_NANOTESLA


def rabi_frequency(params: PhysicalParams, b_osc: float) -> float:
    """On-resonance splitting in Hz produced by a linear drive of amplitude
    b_osc (nT): half the drive amplitude in frequency units."""
    if b_osc < 0.0:
        raise ValidationError("b_osc must be non-negative")
    return 0.5 * params.gamma_g * b_osc * GAUSS_PER_NANOTESLA


@dataclass(frozen=True)
class DressedPrediction:
    """Predicted triplet geometry for a given drive configuration.

    Frequencies in Hz. The sidebands sit symmetrically about the drive
    frequency; sideband_low may be negative at far detuning (a real spectrum
    folds it back onto the positive axis).
    """

    larmor_freq: float
    rabi_freq: float
    detuning: float
    splitting: float
    sideband_low: float
    sideband_high: float

    @property
    def center_freq(self) -> float:
        return 0.5 * (self.sideband_low + self.sideband_high)


def triplet_prediction(params: PhysicalParams, drive: FieldDrive) -> DressedPrediction:
    """Dressed-state prediction: splitting sqrt(detuning^2 + rabi^2) about
    the drive frequency, with detuning = larmor - drive_freq."""
    larmor = larmor_frequency(params, drive.b_static)
    rabi = rabi_frequency(params, drive.b_osc)
    det = larmor - drive.drive_freq
    split = math.hypot(det, rabi)
    return DressedPrediction(
        larmor_freq=larmor, rabi_freq=rabi, detuning=det, splitting=split,
        sideband_low=drive.drive_freq - split,
        sideband_high=drive.drive_freq + split)


def b_osc_from_splitting(params: PhysicalParams, splitting: float) -> float:
    """Drive amplitude in nT that yields the given on-resonance splitting.

    Inverse of rabi_frequency; the basis of amplitude calibration from a
    measured resonant triplet."""
    if splitting < 0.0:
        raise ValidationError("splitting must be non-negative")
    return 2.0 * splitting / (params.gamma_g * GAUSS_PER_NANOTESLA)


def rotate_state(state: SpinState, axis: str = "y",
                 angle_rad: float = 0.5 * math.pi) -> SpinState:
    """Rigidly rotate all three species vectors about a lab axis.

    Models an ideal tipping pulse applied to an equilibrium state, which is
    how free-precession runs are initialized.
    """
    if axis not in ("x", "y", "z"):
        raise ValidationError("axis must be 'x', 'y' or 'z'")
    unit = {"x": np.array([1.0, 0, 0]), "y": np.array([0, 1.0, 0]),
            "z": np.array([0, 0, 1.0])}[axis]
    k = _cross_matrix(unit)
    rot = np.eye(3) + math.sin(angle_rad) * k + (1 - math.cos(angle_rad)) * (k @ k)
    return SpinState(rot @ state.i_vec, rot @ state.f_mu, rot @ state.f_mu_prime)
