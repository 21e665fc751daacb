"""Amplitude calibration: read the drive field back off the splitting.

On resonance the splitting equals half the drive amplitude in frequency
units, so a measured splitting is a magnetometer reading for B_M. The
script simulates a handful of "unknown" drive amplitudes, measures each
splitting from the spectrum alone, inverts it and tabulates the
recovered amplitude against the truth.
"""

import csv
import pathlib

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from hemollow.model import (PhysicalParams, FieldDrive, b_osc_from_splitting,
                            triplet_prediction)
from hemollow.sequence import standard_pulse
from hemollow.sweep import run_single

OUT = pathlib.Path(__file__).parent / "output"
TRUE_AMPLITUDES = (35.0, 60.0, 85.0, 110.0, 135.0)


def main():
    OUT.mkdir(exist_ok=True)
    params = PhysicalParams()
    rows = []
    for b_true in TRUE_AMPLITUDES:
        drive = FieldDrive(125.0, b_true, 4.0)
        pred = triplet_prediction(params, drive)
        seq = standard_pulse(0.0, 10.0, 0.0, drive)
        point = run_single(params, drive, seq)
        split = point.features.splitting
        b_rec = b_osc_from_splitting(params, split)
        rows.append((b_true, pred.splitting, split, b_rec))
        print(f"true {b_true:6.1f} nT  predicted {pred.splitting:.4f} Hz  "
              f"measured {split:.4f} Hz  recovered {b_rec:6.2f} nT  "
              f"({100.0 * (b_rec - b_true) / b_true:+.2f} %)")

    with open(OUT / "inverse_magnetometry.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["b_true_nt", "predicted_splitting_hz",
                    "measured_splitting_hz", "b_recovered_nt"])
        w.writerows(rows)

    truths = [r[0] for r in rows]
    recovered = [r[3] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 4.5))
    lim = (0.0, max(truths) * 1.1)
    ax.plot(lim, lim, "--", color="0.6", label="identity")
    ax.plot(truths, recovered, "o", label="recovered")
    ax.set_xlim(lim)
    ax.set_ylim(lim)
    ax.set_xlabel("true $B_M$ (nT)")
    ax.set_ylabel("recovered $B_M$ (nT)")
    ax.set_title("drive amplitude from measured splitting")
    ax.legend()
    fig.tight_layout()
    fig.savefig(OUT / "inverse_magnetometry.png", dpi=150)
    print(f"wrote {OUT / 'inverse_magnetometry.png'}")


if __name__ == "__main__":
    main()
