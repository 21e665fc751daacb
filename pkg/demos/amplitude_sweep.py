"""Sideband splitting grows linearly with drive amplitude.

Sweeps the resonant drive from 30 to 150 nT, extracts the splitting at
each point and fits a line. The slope should match half the drive
amplitude expressed in frequency units, 1.6e-2 Hz per nT for the
default gyromagnetic ratio, with an intercept consistent with zero.
"""

import csv
import pathlib

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from hemollow.model import PhysicalParams, rabi_frequency
from hemollow.sweep import fit_rabi_linearity, run_regimes

OUT = pathlib.Path(__file__).parent / "output"


def main():
    OUT.mkdir(exist_ok=True)
    params = PhysicalParams()
    values = list(np.arange(30.0, 151.0, 10.0))
    sweep = run_regimes(values, params, workers=4)
    fit = fit_rabi_linearity(sweep)
    analytic = rabi_frequency(params, 1.0)
    print(f"fitted slope     = {fit.slope:.5f} Hz/nT")
    print(f"analytic slope   = {analytic:.5f} Hz/nT")
    print(f"intercept        = {fit.intercept:+.4f} Hz")
    print(f"r^2              = {fit.r_squared:.6f} over {fit.n_points} points")

    with open(OUT / "amplitude_sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["b_osc_nt", "splitting_hz"])
        for b, feats in zip(sweep.axis_values, sweep.features):
            w.writerow([b, feats.splitting])

    xs = np.array(sweep.axis_values)
    ys = np.array([f.splitting for f in sweep.features])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, ys, "o", label="measured splitting")
    grid = np.linspace(0.0, xs.max() * 1.05, 50)
    ax.plot(grid, fit.slope * grid + fit.intercept, "-",
            label=f"fit: {fit.slope:.4f} Hz/nT")
    ax.plot(grid, analytic * grid, "--", color="0.5",
            label=f"analytic: {analytic:.4f} Hz/nT")
    ax.set_xlabel("drive amplitude $B_M$ (nT)")
    ax.set_ylabel("splitting (Hz)")
    ax.set_title("splitting vs drive amplitude")
    ax.legend()
    fig.tight_layout()
    fig.savefig(OUT / "amplitude_sweep.png", dpi=150)
    print(f"wrote {OUT / 'amplitude_sweep.png'}")


if __name__ == "__main__":
    main()
