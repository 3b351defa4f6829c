"""Figures written next to the CSV output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_LABELS = {
    "areas": ("throat area", "pdf"),
    "volumes": ("pore volume", "pdf"),
    "coordination": ("coordination number", "fraction of pores"),
}


def plot_distributions(tables: dict, outdir) -> list[Path]:
    outdir = Path(outdir)
    written = []
    for key, table in tables.items():
        xlabel, ylabel = _LABELS.get(key, (key, "density"))
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        if len(table.centers):
            ax.bar(table.centers, table.density, width=table.widths, edgecolor="black", linewidth=0.5)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        fig.tight_layout()
        path = outdir / f"{key}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def plot_length_errors(cases, kind: str, path) -> Path:
    xs = [c.case for c in cases]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(xs, [100 * c.midpoint_error for c in cases], "o-", ms=3, label="face-midpoint chain")
    ax.plot(xs, [100 * c.pointset_error for c in cases], "s-", ms=3, label="point set")
    ax.set_xlabel("angle (degrees)" if kind == "line" else "radius (voxels)")
    ax.set_ylabel("relative error (%)")
    if kind == "circle":
        ax.set_xscale("log")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
