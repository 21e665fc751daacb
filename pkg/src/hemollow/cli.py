"""Command-line front end: simulate, sweep, predict, analyze.

Each command reads a JSON scenario (see the scenario module for the
schema), runs the corresponding pipeline and writes its artifacts into the
scenario's output directory. Failures map onto distinct exit codes so
scripts can tell bad configuration (2) from numerical breakdown (3) from
file-system trouble (4).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .errors import NumericalError, ValidationError
from .io import (
    features_to_dict,
    read_observable_csv,
    write_json,
    write_observable_csv,
    write_spectrum_csv,
    write_sweep_features_csv,
    write_sweep_spectra_csv,
    write_trajectory_csv,
)
from .model import (
    b_osc_from_splitting,
    larmor_frequency,
    triplet_prediction,
)
from .scenario import SCHEMA_VERSION, Scenario
from .spectral import extract_triplet, observable, power_spectrum
from .sweep import (
    SweepResult,
    detuning_law_error,
    fit_rabi_linearity,
    run_detuning_sweep,
    run_pump_comparison,
    run_regimes,
    run_single,
)

EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

# The gated-pump run counts as suppressed when the carrier falls below this
# fraction of the strongest sideband; recorded in fit.json so the criterion
# travels with the result.
SUPPRESSION_THRESHOLD = 0.15


def _die(code: int, exc: BaseException) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


def _execute(action) -> None:
    try:
        action()
    except ValidationError as exc:
        _die(EXIT_VALIDATION, exc)
    except NumericalError as exc:
        _die(EXIT_NUMERICAL, exc)
    except OSError as exc:
        _die(EXIT_IO, exc)


def _load_scenario(config_path: str, out_dir: str | None,
                   model: str | None) -> Scenario:
    return Scenario.from_file(config_path).with_overrides(output_dir=out_dir,
                                                          model=model)


def _outdir(scenario: Scenario) -> Path:
    path = Path(scenario.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _provenance(scenario: Scenario) -> dict:
    return {"schema_version": SCHEMA_VERSION,
            "scenario_hash": scenario.digest(),
            "scenario": scenario.to_dict()}


_CONFIG = click.option("--config", "config_path", required=True,
                       type=click.Path(), help="JSON scenario file.")
_OUT = click.option("--out", "out_dir", default=None,
                    help="Output directory (overrides the scenario).")
_MODEL = click.option("--model", type=click.Choice(["full", "reduced"]),
                      default=None, help="Override the scenario's model.")
_SEED = click.option("--seed", type=int, default=None,
                     help="Reserved; simulations are deterministic.")


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Simulate and analyze driven spin precession experiments."""


@main.command()
@_CONFIG
@_OUT
@_MODEL
@_SEED
def simulate(config_path, out_dir, model, seed) -> None:
    """Run one scenario and write trajectory, observable, spectrum and
    features files."""
    del seed

    def action():
        sc = _load_scenario(config_path, out_dir, model)
        point = run_single(sc.params, sc.drive, sc.build_sequence(),
                           model=sc.model, config=sc.integration,
                           analysis=sc.analysis, initial=sc.initial_state)
        out = _outdir(sc)
        digest = sc.short_digest()
        write_trajectory_csv(out / "trajectory.csv", point.trajectory, digest)
        full_series = observable(point.trajectory,
                                 sc.analysis.weight_mu_prime)
        write_observable_csv(out / "observable.csv", full_series, digest)
        write_spectrum_csv(out / "spectrum.csv", point.spectrum, digest)
        payload = _provenance(sc)
        payload["features"] = features_to_dict(point.features)
        pred = triplet_prediction(sc.params, sc.drive)
        payload["prediction"] = {
            "larmor_hz": pred.larmor_freq, "rabi_hz": pred.rabi_freq,
            "detuning_hz": pred.detuning, "splitting_hz": pred.splitting,
            "sideband_low_hz": pred.sideband_low,
            "sideband_high_hz": pred.sideband_high,
        }
        write_json(out / "features.json", payload)
        click.echo(f"wrote trajectory.csv observable.csv spectrum.csv "
                   f"features.json to {out}")

    _execute(action)


@main.command()
@_CONFIG
@click.option("--invert", "invert_splitting", type=float, default=None,
              help="Also infer the drive amplitude that would produce this "
                   "measured resonant splitting, in Hz.")
def predict(config_path, invert_splitting) -> None:
    """Print the analytic triplet prediction as JSON (no integration)."""

    def action():
        sc = Scenario.from_file(config_path)
        pred = triplet_prediction(sc.params, sc.drive)
        splitting = pred.splitting if invert_splitting is None \
            else invert_splitting
        payload = {
            "schema_version": SCHEMA_VERSION,
            "larmor_hz": pred.larmor_freq,
            "rabi_hz": pred.rabi_freq,
            "detuning_hz": pred.detuning,
            "splitting_hz": pred.splitting,
            "center_hz": sc.drive.drive_freq,
            "sideband_low_hz": pred.sideband_low,
            "sideband_high_hz": pred.sideband_high,
            # the inverse map assumes the splitting was measured on resonance
            "inverse": {"splitting_hz": splitting,
                        "b_osc_nt": b_osc_from_splitting(sc.params, splitting)},
        }
        click.echo(json.dumps(payload, indent=2, sort_keys=True))

    _execute(action)


def _amplitude_fit(sweep: SweepResult) -> dict:
    try:
        fit = fit_rabi_linearity(sweep)
    except ValidationError as exc:
        n = sum(1 for f in sweep.features
                if f.found_mask[1] or f.found_mask[2])
        return {"kind": "amplitude", "degenerate": True, "reason": str(exc),
                "n_points": n, "slope_hz_per_nt": None, "intercept_hz": None,
                "r_squared": None}
    return {"kind": "amplitude", "degenerate": fit.degenerate,
            "n_points": fit.n_points, "slope_hz_per_nt": fit.slope,
            "intercept_hz": fit.intercept, "r_squared": fit.r_squared}


def _detuning_fit(sweep: SweepResult, sc: Scenario) -> dict:
    try:
        law = detuning_law_error(sweep, sc.params, sc.drive.b_osc,
                                 sc.drive.b_static)
    except ValidationError as exc:
        return {"kind": "detuning", "degenerate": True, "reason": str(exc),
                "n_points": 0, "rms_rel_error": None}
    return {"kind": "detuning", "degenerate": False,
            "n_points": law.n_points, "rms_rel_error": law.rms_rel_error,
            "points": {"drive_freq_hz": list(law.drive_freqs),
                       "predicted_hz": list(law.predicted),
                       "measured_hz": list(law.measured)}}


@main.command()
@_CONFIG
@_OUT
@_MODEL
@_SEED
def sweep(config_path, out_dir, model, seed) -> None:
    """Run the scenario's sweep block and write spectra, features and the
    applicable fit."""
    del seed

    def action():
        sc = _load_scenario(config_path, out_dir, model)
        if sc.sweep is None:
            raise ValidationError(
                "scenario has no sweep block; add \"sweep\": "
                "{\"kind\": ..., \"values\": [...]} to the config")
        spec = sc.sweep
        common = dict(pulse_length=sc.protocol.pulse_length,
                      pump_value=sc.pump_value, model=sc.model,
                      config=sc.integration, analysis=sc.analysis)
        if spec.kind == "amplitude":
            result = run_regimes(spec.values, sc.params, drive=sc.drive,
                                 pump_mode=sc.protocol.pump_mode,
                                 workers=spec.workers, **common)
            fit = _amplitude_fit(result)
        elif spec.kind == "detuning":
            result = run_detuning_sweep(spec.values, sc.params,
                                        b_osc=sc.drive.b_osc,
                                        b_static=sc.drive.b_static,
                                        pump_mode=sc.protocol.pump_mode,
                                        workers=spec.workers, **common)
            fit = _detuning_fit(result, sc)
        else:
            cmp = run_pump_comparison(sc.params, sc.drive, **common)
            result = SweepResult(
                axis_values=(0.0, 1.0),
                spectra=(cmp.continuous_spectrum, cmp.gated_spectrum),
                features=(cmp.continuous, cmp.gated))
            fit = {"kind": "pump-comparison",
                   "axis_labels": {"0": "continuous", "1": "gated"},
                   "continuous_ratio": cmp.continuous_ratio,
                   "gated_ratio": cmp.gated_ratio,
                   "suppression_threshold": SUPPRESSION_THRESHOLD,
                   "gated_suppressed":
                       cmp.gated_ratio < SUPPRESSION_THRESHOLD,
                   "continuous_features": features_to_dict(cmp.continuous),
                   "gated_features": features_to_dict(cmp.gated)}
        out = _outdir(sc)
        digest = sc.short_digest()
        write_sweep_spectra_csv(out / "sweep_spectra.csv", result, digest)
        write_sweep_features_csv(out / "sweep_features.csv", result, digest)
        payload = _provenance(sc)
        payload["fit"] = fit
        write_json(out / "fit.json", payload)
        click.echo(f"wrote sweep_spectra.csv sweep_features.csv fit.json "
                   f"to {out}")

    _execute(action)


@main.command()
@click.argument("observable_csv", type=click.Path())
@_CONFIG
@_OUT
@_SEED
def analyze(observable_csv, config_path, out_dir, seed) -> None:
    """Re-run spectral extraction on an existing observable.csv.

    The record is windowed to the scenario's drive pulse when it covers it,
    so analyzing a file written by `simulate` reproduces that run's spectrum
    and features.
    """
    del seed

    def action():
        sc = _load_scenario(config_path, out_dir, None)
        series = read_observable_csv(observable_csv)
        sequence = sc.build_sequence()
        window = sequence.drive_window()
        eps = 0.5 * series.dt
        if window is not None and series.t0 <= window[0] + eps \
                and series.t0 + series.duration >= window[1] - eps:
            series = series.crop(window[0], window[1])
        spectrum = power_spectrum(series, window=sc.analysis.window,
                                  zero_pad_factor=sc.analysis.zero_pad_factor)
        if sc.drive.b_osc != 0.0 and window is not None:
            expected = sc.drive.drive_freq
        else:
            expected = larmor_frequency(sc.params, sc.drive.b_static)
        feats = extract_triplet(
            spectrum, expected,
            search_halfwidth=sc.analysis.search_halfwidth,
            min_prominence=sc.analysis.min_prominence)
        out = _outdir(sc)
        digest = sc.short_digest()
        write_spectrum_csv(out / "spectrum.csv", spectrum, digest)
        payload = _provenance(sc)
        payload["source"] = str(observable_csv)
        payload["features"] = features_to_dict(feats)
        write_json(out / "features.json", payload)
        click.echo(f"wrote spectrum.csv features.json to {out}")

    _execute(action)


if __name__ == "__main__":
    main()
