#!/usr/bin/env python3
"""Plot all seven baseline estimators against one synthetic raw spectrum.

Writes baseline_gallery.png in the working directory.
"""

import argparse

from ramanid.baseline import BASELINE_KINDS, BaselineMethod, estimate_baseline
from ramanid.harness import synth_dataset
from ramanid.spectrum import Grid


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--severity", type=float, default=1.0)
    parser.add_argument("--out", default="baseline_gallery.png")
    args = parser.parse_args()

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    grid = Grid(100.0, 1900.0, 512)
    pair = synth_dataset(4, 2, args.severity, 0.01, seed=args.seed, grid=grid)
    y = pair.raw.features[0]
    x = grid.wavenumbers()

    fig, axes = plt.subplots(4, 2, figsize=(11, 12), sharex=True)
    axes = axes.ravel()
    axes[0].plot(x, y, "k", lw=0.8)
    axes[0].plot(x, pair.clean.features[0], "g", lw=0.8, alpha=0.6)
    axes[0].set_title("raw (black) vs baseline-free (green)")
    for ax, kind in zip(axes[1:], BASELINE_KINDS):
        estimate = estimate_baseline(y, BaselineMethod(kind))
        ax.plot(x, y, "k", lw=0.8)
        ax.plot(x, estimate.baseline, "r", lw=1.2)
        ax.plot(x, y - estimate.baseline, "b", lw=0.8, alpha=0.7)
        ax.set_title(f"{kind} ({estimate.iterations_used} iterations)")
    for ax in axes:
        ax.set_xlim(x[0], x[-1])
    fig.supxlabel("wavenumber (cm$^{-1}$)")
    fig.supylabel("intensity (scaled)")
    fig.tight_layout()
    fig.savefig(args.out, dpi=130)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
