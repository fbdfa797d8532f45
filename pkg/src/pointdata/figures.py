"""SVG figures: path-loss scatter with fit lines, and empirical CDFs.

Figures are a convenience view; the CSV plot-data files written by the CLI
are the authoritative, byte-reproducible outputs.  SVG is used because it is
self-contained text.  Matplotlib is imported lazily with the Agg backend so
importing this module never touches a display.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .analysis import ABGFit, CIFit, EmpiricalCDF

_MARKERS = ("o", "s", "^", "D", "v", "P", "X", "*")


def _pyplot():
    import matplotlib
    matplotlib.use("Agg", force=False)
    # Stable ids keep regenerated SVGs comparable; dates would defeat that.
    matplotlib.rcParams["svg.hashsalt"] = "pointdata"
    import matplotlib.pyplot as plt
    return plt


def save_scatter_figure(path, rows, fits: dict, out_path_note: str = "") -> Path:
    """Scatter of (distance, PL) per campaign with model curves overlaid.

    ``rows`` are scatter_data tuples; ``fits`` maps a Split to a CIFit or
    ABGFit evaluated at that split's points.
    """
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    campaigns = sorted({cid for _, _, cid, _ in rows})
    for i, cid in enumerate(campaigns):
        for loc_value, filled in (("LOS", True), ("NLOS", False)):
            xs = [float(d) for d, _, c, loc in rows
                  if c == cid and loc.value == loc_value]
            ys = [float(pl) for _, pl, c, loc in rows
                  if c == cid and loc.value == loc_value]
            if not xs:
                continue
            ax.scatter(xs, ys, s=28, marker=_MARKERS[i % len(_MARKERS)],
                       facecolors=None if filled else "none",
                       edgecolors=f"C{i}", color=f"C{i}",
                       label=f"{cid} {loc_value}")
    all_d = [float(d) for d, _, _, _ in rows]
    if all_d:
        grid = np.logspace(math.log10(max(min(all_d) * 0.8, 1.01)),
                           math.log10(max(all_d) * 1.2), 128)
        for j, (split, fit) in enumerate(sorted(fits.items(),
                                                key=lambda kv: kv[0].value)):
            if isinstance(fit, CIFit):
                curve = fit.fspl_ref_db + 10.0 * fit.ple * np.log10(grid)
                label = f"CI {split.value}: n={fit.ple:.2f}"
            elif isinstance(fit, ABGFit):
                curve = (10.0 * fit.alpha * np.log10(grid) + fit.beta_db
                         + 10.0 * fit.gamma * math.log10(1.0))
                label = f"ABG {split.value}: a={fit.alpha:.2f}"
            else:  # pragma: no cover - no other fit types exist
                continue
            ax.plot(grid, curve, linestyle=("-", "--", ":")[j % 3],
                    color="k", linewidth=1.2, label=label)
    ax.set_xscale("log")
    ax.set_xlabel("TX-RX separation [m]")
    ax.set_ylabel("Path loss [dB]")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7, loc="best")
    if out_path_note:
        ax.set_title(out_path_note, fontsize=9)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def save_cdf_figure(path, cdfs: dict[str, EmpiricalCDF], xlabel: str) -> Path:
    """Step plot of one or more empirical CDFs, keyed by legend label."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for i, (label, cdf) in enumerate(sorted(cdfs.items())):
        xs = np.asarray(cdf.sorted_values)
        ys = np.asarray(cdf.probabilities)
        ax.step(np.concatenate([[xs[0]], xs]), np.concatenate([[0.0], ys]),
                where="post", color=f"C{i}", label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("Empirical CDF")
    ax.set_ylim(0.0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8, loc="lower right")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
