"""Static SVG figures for the command-line reports.

All functions consume plain arrays (the same values written to the
result CSVs) and write deterministic SVG files: date metadata is
stripped and the element-id hash salt fixed, so identical inputs give
byte-identical figures.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_SVG_KW = {"format": "svg", "metadata": {"Date": None}}
matplotlib.rcParams["svg.hashsalt"] = "sorted-effects"


def _save(fig, path):
    fig.savefig(path, **_SVG_KW)
    plt.close(fig)


def plot_spe(path, us, estimate, lower_pt, upper_pt, lower_unif, upper_unif,
             ape=None, var="", alpha=0.1):
    """SPE curve with pointwise and uniform bands, plus the APE level."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.fill_between(us, lower_unif, upper_unif, color="#9ecae1", alpha=0.6,
                    label=f"{1 - alpha:.0%} uniform band")
    ax.plot(us, lower_pt, "--", color="#3182bd", lw=0.9,
            label=f"{1 - alpha:.0%} pointwise band")
    ax.plot(us, upper_pt, "--", color="#3182bd", lw=0.9)
    ax.plot(us, estimate, color="#08306b", lw=1.6, label="SPE")
    if ape is not None:
        ax.axhline(ape, color="#e6550d", lw=1.0, ls=":", label="APE")
    ax.set_xlabel("percentile index u")
    ax.set_ylabel(f"partial effect{f' of {var}' if var else ''}")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def plot_ca_dist(path, var, points, most, most_lo, most_hi,
                 least, least_lo, least_hi, alpha=0.1):
    """Group CDFs of one variable with uniform bands."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.fill_between(points, most_lo, most_hi, step="post",
                    color="#fdae6b", alpha=0.5)
    ax.fill_between(points, least_lo, least_hi, step="post",
                    color="#9ecae1", alpha=0.5)
    ax.step(points, most, where="post", color="#e6550d", lw=1.4,
            label="most affected")
    ax.step(points, least, where="post", color="#08306b", lw=1.4,
            label="least affected")
    ax.set_xlabel(var)
    ax.set_ylabel("cumulative probability")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(frameon=False, fontsize=8, loc="lower right")
    fig.tight_layout()
    _save(fig, path)


def plot_subpop_projection(path, varx, vary, most_xy, least_xy):
    """Scatter projection of the outer confidence sets on two variables."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if len(least_xy):
        ax.scatter(least_xy[:, 0], least_xy[:, 1], s=12, marker="o",
                   facecolors="none", edgecolors="#08306b", lw=0.7,
                   label="least affected (outer CS)")
    if len(most_xy):
        ax.scatter(most_xy[:, 0], most_xy[:, 1], s=12, marker="x",
                   color="#e6550d", lw=0.8, label="most affected (outer CS)")
    ax.set_xlabel(varx)
    ax.set_ylabel(vary)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    _save(fig, path)
