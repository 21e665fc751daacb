"""CSV and JSON writers for run artifacts, plus the observable reader.

Every CSV starts with a single comment line carrying the schema version and
the scenario digest, so any table on disk can be traced back to the exact
configuration that produced it. Floats are written with repr, which
round-trips exactly through text.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .errors import ValidationError
from .scenario import SCHEMA_VERSION
from .spectral import ObservableSeries, Spectrum, TripletFeatures
from .sweep import SweepResult

_FULL_COLUMNS = ("i_x", "i_y", "i_z", "f_mu_x", "f_mu_y", "f_mu_z",
                 "f_mup_x", "f_mup_y", "f_mup_z")
_REDUCED_COLUMNS = ("i_x", "i_y", "i_z")

_FEATURE_FIELDS = ("center_freq", "sideband_low_freq", "sideband_high_freq",
                   "center_amp", "sideband_low_amp", "sideband_high_amp",
                   "splitting")


def _header_line(scenario_digest: str) -> str:
    return f"# hemollow schema={SCHEMA_VERSION} scenario={scenario_digest}"


def _write_table(path, scenario_digest: str, columns, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_header_line(scenario_digest) + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def write_trajectory_csv(path, traj, scenario_digest: str) -> None:
    cols = _FULL_COLUMNS if traj.kind == "full" else _REDUCED_COLUMNS
    t = traj.times()
    rows = (np.concatenate(([t[i]], traj.states[i]))
            for i in range(traj.n_samples))
    _write_table(path, scenario_digest, ("t",) + cols, rows)


def write_observable_csv(path, series: ObservableSeries,
                         scenario_digest: str) -> None:
    t = series.times()
    rows = zip(t, series.samples)
    _write_table(path, scenario_digest, ("t", "signal"), rows)


def read_observable_csv(path) -> ObservableSeries:
    """Parse a t,signal table back into a series.

    Comment lines are skipped; the time column must be uniformly spaced,
    since all downstream analysis assumes a fixed sample rate.
    """
    ts, ys = [], []
    with open(path, "r", encoding="utf-8") as fh:
        header = None
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                if header[:2] != ["t", "signal"]:
                    raise ValidationError(
                        f"expected columns t,signal, got {line!r}")
                continue
            parts = line.split(",")
            if len(parts) < 2:
                raise ValidationError(f"malformed row {line!r}")
            ts.append(float(parts[0]))
            ys.append(float(parts[1]))
    if len(ts) < 2:
        raise ValidationError("observable table needs at least 2 rows")
    t = np.asarray(ts)
    d = np.diff(t)
    dt = (t[-1] - t[0]) / (t.size - 1)
    if dt <= 0.0 or np.any(np.abs(d - dt) > 1e-6 * dt):
        raise ValidationError("time column must be uniformly increasing")
    return ObservableSeries(float(t[0]), float(dt), np.asarray(ys))


def write_spectrum_csv(path, spec: Spectrum, scenario_digest: str) -> None:
    _write_table(path, scenario_digest, ("freq", "magnitude"),
                 zip(spec.freqs, spec.magnitude))


def write_sweep_spectra_csv(path, sweep: SweepResult,
                            scenario_digest: str) -> None:
    """Long format (axis_value, freq, magnitude), one block per sweep point,
    ready for heat-map pivoting."""
    def rows():
        for axis, spec in zip(sweep.axis_values, sweep.spectra):
            for f, m in zip(spec.freqs, spec.magnitude):
                yield (axis, f, m)

    _write_table(path, scenario_digest, ("axis_value", "freq", "magnitude"),
                 rows())


def write_sweep_features_csv(path, sweep: SweepResult,
                             scenario_digest: str) -> None:
    cols = ("axis_value", "found_center", "found_low", "found_high",
            *_FEATURE_FIELDS)

    def rows():
        for axis, f in zip(sweep.axis_values, sweep.features):
            yield (axis, *(float(b) for b in f.found_mask),
                   *(getattr(f, name) for name in _FEATURE_FIELDS))

    _write_table(path, scenario_digest, cols, rows())


def features_to_dict(feats: TripletFeatures) -> dict:
    """JSON-safe view of extracted features (NaN becomes null)."""
    out = {"found_mask": list(feats.found_mask)}
    for name in _FEATURE_FIELDS:
        v = getattr(feats, name)
        out[name] = None if math.isnan(v) else v
    return out


def write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
