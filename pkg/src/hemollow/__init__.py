"""Simulator and analysis toolkit for ultra-low-frequency Mollow triplets
in helium-3 ground/metastable spin dynamics."""

from .errors import (
    NonFiniteStateError,
    NumericalError,
    SingularSystemError,
    StiffnessError,
    ValidationError,
)
from .integrate import (
    IntegrationConfig,
    Trajectory,
    integrate_full,
    integrate_reduced,
    steady_state,
    steady_state_reduced,
)
from .model import (
    DressedPrediction,
    FieldDrive,
    PhysicalParams,
    SpinState,
    b_osc_from_splitting,
    field_at,
    larmor_frequency,
    rabi_frequency,
    rhs_full,
    rhs_reduced,
    rotate_state,
    triplet_prediction,
)
from .scenario import Scenario, SequenceSpec, SweepSpec
from .sequence import PulseSequence, Segment, standard_pulse
from .sweep import (
    AnalysisOptions,
    DetuningLaw,
    PointResult,
    PumpComparison,
    RabiFit,
    SweepResult,
    center_sideband_ratio,
    detuning_law_error,
    fit_rabi_linearity,
    run_detuning_sweep,
    run_pump_comparison,
    run_regimes,
    run_single,
)
from .spectral import (
    DecayFit,
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

__version__ = "0.1.0"

__all__ = [
    "AnalysisOptions",
    "DecayFit",
    "DetuningLaw",
    "DressedPrediction",
    "FieldDrive",
    "IntegrationConfig",
    "NonFiniteStateError",
    "NumericalError",
    "ObservableSeries",
    "PhysicalParams",
    "PointResult",
    "PulseSequence",
    "PumpComparison",
    "RabiFit",
    "Scenario",
    "Segment",
    "SequenceSpec",
    "SingularSystemError",
    "SpinState",
    "Spectrum",
    "StiffnessError",
    "SweepResult",
    "SweepSpec",
    "Trajectory",
    "TripletFeatures",
    "ValidationError",
    "b_osc_from_splitting",
    "center_sideband_ratio",
    "detuning_law_error",
    "envelope",
    "extract_triplet",
    "field_at",
    "fit_decay",
    "fit_rabi_linearity",
    "integrate_full",
    "integrate_reduced",
    "larmor_frequency",
    "modulation_depth",
    "observable",
    "power_spectrum",
    "rabi_frequency",
    "rhs_full",
    "rhs_reduced",
    "rotate_state",
    "run_detuning_sweep",
    "run_pump_comparison",
    "run_regimes",
    "run_single",
    "standard_pulse",
    "steady_state",
    "steady_state_reduced",
    "triplet_prediction",
]
