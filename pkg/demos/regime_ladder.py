"""Three drive amplitudes, three spectral regimes.

At 3 nT the drive is too weak to dress the precession and the spectrum
shows a single line at the drive frequency. At 9 nT the sidebands exist
but hide inside the carrier's leakage skirt. At 21 nT the triplet is
fully resolved and the time-domain envelope beats all the way to its
nulls. Writes the three spectra and the strong-drive envelope to CSV
and a two-panel figure to PNG.
"""

import csv
import pathlib

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from hemollow.model import PhysicalParams, FieldDrive
from hemollow.sequence import standard_pulse
from hemollow.spectral import envelope, modulation_depth
from hemollow.sweep import run_single

OUT = pathlib.Path(__file__).parent / "output"
AMPLITUDES = (3.0, 9.0, 21.0)


def main():
    OUT.mkdir(exist_ok=True)
    params = PhysicalParams()
    points = {}
    for b_m in AMPLITUDES:
        drive = FieldDrive(125.0, b_m, 4.0)
        seq = standard_pulse(0.0, 10.0, 0.0, drive)
        points[b_m] = run_single(params, drive, seq)
        feats = points[b_m].features
        print(f"B_M = {b_m:5.1f} nT  found_mask = {feats.found_mask}"
              + (f"  splitting = {feats.splitting:.3f} Hz"
                 if feats.found_mask[1] or feats.found_mask[2] else ""))

    with open(OUT / "regime_spectra.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["b_osc_nt", "freq_hz", "magnitude"])
        for b_m in AMPLITUDES:
            spec = points[b_m].spectrum
            for f, m in zip(spec.freqs, spec.magnitude):
                w.writerow([b_m, f, m])

    env = envelope(points[21.0].series, 4.0).crop(1.0, 9.5)
    depth = modulation_depth(env)
    print(f"strong-drive envelope modulation depth = {depth:.3f}")
    with open(OUT / "regime_envelope_21nt.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "envelope"])
        for t, v in zip(env.times(), env.samples):
            w.writerow([t, v])

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
    for b_m in AMPLITUDES:
        spec = points[b_m].spectrum
        ax1.plot(spec.freqs, spec.magnitude, label=f"{b_m:g} nT")
    ax1.set_xlim(2.0, 6.0)
    ax1.set_yscale("log")
    ax1.set_xlabel("frequency (Hz)")
    ax1.set_ylabel("one-sided amplitude")
    ax1.set_title("drive-amplitude regimes")
    ax1.legend(title="$B_M$")

    series = points[21.0].series
    ax2.plot(series.times(), series.samples, lw=0.4, color="0.6",
             label="signal")
    ax2.plot(env.times(), env.samples, color="C3", label="envelope")
    ax2.plot(env.times(), -env.samples, color="C3")
    ax2.set_xlabel("time (s)")
    ax2.set_ylabel("transverse signal")
    ax2.set_title(f"21 nT beating, depth = {depth:.2f}")
    ax2.legend()

    fig.tight_layout()
    fig.savefig(OUT / "regime_ladder.png", dpi=150)
    print(f"wrote {OUT / 'regime_ladder.png'}")


if __name__ == "__main__":
    main()
