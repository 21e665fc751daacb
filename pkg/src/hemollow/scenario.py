"""Run configuration: one validated, hashable description of an experiment.

A scenario collects everything a run depends on (physical rates, field
drive, pulse protocol, integration settings, analysis settings, model
choice) in a single JSON document with a versioned schema. Parsing is
strict: unknown keys anywhere are rejected by name instead of being
silently ignored, so a typo cannot quietly fall back to a default.

The canonical serialization expands every default, sorts keys and strips
whitespace; its SHA-256 digest identifies the run in output headers and
provenance blocks.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, fields, replace

from .errors import ValidationError
from .integrate import IntegrationConfig
from .model import FieldDrive, PhysicalParams
from .sequence import PUMP_MODES, PulseSequence, standard_pulse
from .sweep import MODELS, AnalysisOptions

SCHEMA_VERSION = 1

SWEEP_KINDS = ("amplitude", "detuning", "pump-comparison")
INITIAL_STATES = ("auto", "steady", "tipped")

_SECTIONS = ("schema_version", "model", "initial_state", "output_dir",
             "params", "drive", "sequence", "integration", "analysis",
             "sweep")


@dataclass(frozen=True)
class SequenceSpec:
    """Three-phase pulse protocol: quiet lead-in, drive pulse, tail.

    pump_value None resolves to the scenario's pump polarization when the
    PulseSequence is built.
    """

    duration_before: float = 0.0
    pulse_length: float = 10.0
    duration_after: float = 0.0
    pump_mode: str = "continuous"
    pump_value: float | None = None

    def __post_init__(self):
        for name in ("duration_before", "pulse_length", "duration_after"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0.0:
                raise ValidationError(f"{name} must be a non-negative number")
        if self.pump_mode not in PUMP_MODES:
            raise ValidationError(
                f"pump_mode must be one of {PUMP_MODES}, got {self.pump_mode!r}")
        if self.pump_value is not None and not 0.0 <= self.pump_value <= 1.0:
            raise ValidationError("pump_value must lie in [0, 1]")


@dataclass(frozen=True)
class SweepSpec:
    """What cmd_sweep should run: the family and its axis values."""

    kind: str
    values: tuple = ()
    workers: int = 1

    def __post_init__(self):
        if self.kind not in SWEEP_KINDS:
            raise ValidationError(
                f"sweep kind must be one of {SWEEP_KINDS}, got {self.kind!r}")
        vals = tuple(float(v) for v in self.values)
        if self.kind == "pump-comparison":
            if vals:
                raise ValidationError(
                    "pump-comparison sweeps take no axis values")
        elif not vals:
            raise ValidationError(f"{self.kind} sweep needs axis values")
        if any(not math.isfinite(v) for v in vals):
            raise ValidationError("sweep values must be finite")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ValidationError("workers must be a positive integer")
        object.__setattr__(self, "values", vals)


def _from_section(cls, section: dict, name: str):
    if not isinstance(section, dict):
        raise ValidationError(f"section {name!r} must be a JSON object")
    known = {f.name for f in fields(cls)}
    unknown = set(section) - known
    if unknown:
        raise ValidationError(
            f"unknown {name} keys: {sorted(unknown)} "
            f"(known: {sorted(known)})")
    return cls(**section)


@dataclass(frozen=True)
class Scenario:
    """Fully validated run description."""

    params: PhysicalParams = PhysicalParams()
    drive: FieldDrive = FieldDrive(125.0, 21.0, 4.0)
    protocol: SequenceSpec = SequenceSpec()
    integration: IntegrationConfig = IntegrationConfig()
    analysis: AnalysisOptions = AnalysisOptions()
    model: str = "reduced"
    initial_state: str = "auto"
    output_dir: str = "out"
    sweep: SweepSpec | None = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValidationError(f"model must be one of {MODELS}")
        if self.initial_state not in INITIAL_STATES:
            raise ValidationError(
                f"initial_state must be one of {INITIAL_STATES}")
        if not isinstance(self.output_dir, str) or not self.output_dir:
            raise ValidationError("output_dir must be a non-empty string")
        if self.protocol.pump_value is None:
            object.__setattr__(self, "protocol",
                               replace(self.protocol,
                                       pump_value=self.params.pump_polarization))

    # -- construction ---------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        if not isinstance(data, dict):
            raise ValidationError("scenario must be a JSON object")
        unknown = set(data) - set(_SECTIONS)
        if unknown:
            raise ValidationError(
                f"unknown scenario keys: {sorted(unknown)} "
                f"(known: {sorted(_SECTIONS)})")
        version = data.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ValidationError(
                f"unsupported schema_version {version!r}; this build reads "
                f"version {SCHEMA_VERSION}")
        kw = {}
        if "params" in data:
            kw["params"] = _from_section(PhysicalParams, data["params"], "params")
        if "drive" in data:
            kw["drive"] = _from_section(FieldDrive, data["drive"], "drive")
        if "sequence" in data:
            kw["protocol"] = _from_section(SequenceSpec, data["sequence"],
                                           "sequence")
        if "integration" in data:
            kw["integration"] = _from_section(IntegrationConfig,
                                              data["integration"], "integration")
        if "analysis" in data:
            kw["analysis"] = _from_section(AnalysisOptions, data["analysis"],
                                           "analysis")
        if data.get("sweep") is not None:
            kw["sweep"] = _from_section(SweepSpec, data["sweep"], "sweep")
        for key in ("model", "initial_state", "output_dir"):
            if key in data:
                kw[key] = data[key]
        return cls(**kw)

    @classmethod
    def from_file(cls, path) -> "Scenario":
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    def with_overrides(self, output_dir: str | None = None,
                       model: str | None = None) -> "Scenario":
        out = self
        if output_dir is not None:
            out = replace(out, output_dir=output_dir)
        if model is not None:
            out = replace(out, model=model)
        return out

    # -- derived objects ------------------------------------------------

    @property
    def pump_value(self) -> float:
        return self.protocol.pump_value

    def build_sequence(self) -> PulseSequence:
        p = self.protocol
        return standard_pulse(p.duration_before, p.pulse_length,
                              p.duration_after, self.drive, p.pump_mode,
                              pump_value=self.pump_value)

    # -- serialization and identity --------------------------------------

    def to_dict(self) -> dict:
        def section(obj):
            return {f.name: getattr(obj, f.name) for f in fields(obj)}

        out = {
            "schema_version": SCHEMA_VERSION,
            "model": self.model,
            "initial_state": self.initial_state,
            "output_dir": self.output_dir,
            "params": section(self.params),
            "drive": section(self.drive),
            "sequence": section(self.protocol),
            "integration": section(self.integration),
            "analysis": section(self.analysis),
            "sweep": None,
        }
        if self.sweep is not None:
            out["sweep"] = {"kind": self.sweep.kind,
                            "values": list(self.sweep.values),
                            "workers": self.sweep.workers}
        return out

    def canonical_json(self) -> str:
        """Sorted, whitespace-free serialization of everything that affects
        results. The output directory is excluded, so rerunning a scenario
        into a different directory keeps the same identity."""
        data = self.to_dict()
        del data["output_dir"]
        return json.dumps(data, sort_keys=True, separators=(",", ":"),
                          allow_nan=False)

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def short_digest(self) -> str:
        return self.digest()[:12]
