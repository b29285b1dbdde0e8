"""Render sweep tables to figure files alongside the CSV output."""

from __future__ import annotations

import os
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

_AXIS_LABELS = {
    "kappa": r"$\kappa / g$",
    "n_emitters": r"$N$",
    "dephasing": r"$\gamma^* / g$",
    "pump_px": r"$P_x / g$",
}

_X_COLUMN = {
    "kappa": "kappa_over_g",
    "n_emitters": "N",
    "dephasing": "gstar_over_g",
    "pump_px": "px_over_g",
}


def _series(rows: Sequence[dict], parameter: str, column: str):
    xs, ys = [], []
    for row in rows:
        if row.get("error"):
            continue
        x, y = row.get(_X_COLUMN[parameter]), row.get(column)
        if x is None or y is None or y != y:  # skip undefined cells
            continue
        xs.append(x)
        ys.append(y)
    return xs, ys


def _log_x(xs) -> bool:
    return len(xs) > 2 and min(xs) > 0 and max(xs) / min(xs) > 50


def render_figures(rows: Sequence[dict], parameter: str, outdir: str,
                   stem: str = "sweep") -> list[str]:
    """Write population and correlation figures for one sweep table.

    Returns the paths written; panels with no plottable points are skipped.
    """
    os.makedirs(outdir, exist_ok=True)
    written: list[str] = []
    xlabel = _AXIS_LABELS[parameter]

    population_curves = [
        ("n_a", r"$n_a = \langle a^\dagger a\rangle$"),
        ("n_J", r"$\langle J_+ J_-\rangle$"),
        ("total_nx", r"$N\, n_x$"),
    ]
    fig, ax = plt.subplots(figsize=(6, 4))
    plotted = False
    for column, label in population_curves:
        xs, ys = _series(rows, parameter, column)
        if xs:
            ax.plot(xs, ys, marker="o", markersize=3, label=label)
            plotted = True
    if plotted:
        if _log_x(ax.get_lines()[0].get_xdata()):
            ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("steady-state populations")
        ax.legend()
        fig.tight_layout()
        path = os.path.join(outdir, f"{stem}_populations.png")
        fig.savefig(path, dpi=150)
        written.append(path)
    plt.close(fig)

    correlation_curves = [
        ("g2_cavity", r"$g^{(2)}_a(0)$"),
        ("g2_collective", r"$g^{(2)}_J(0)$"),
    ]
    fig, ax = plt.subplots(figsize=(6, 4))
    plotted = False
    for column, label in correlation_curves:
        xs, ys = _series(rows, parameter, column)
        if xs:
            ax.plot(xs, ys, marker="o", markersize=3, label=label)
            plotted = True
    if plotted:
        if _log_x(ax.get_lines()[0].get_xdata()):
            ax.set_xscale("log")
        ax.axhline(1.0, color="gray", linewidth=0.8, linestyle="--")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(r"$g^{(2)}(0)$")
        ax.legend()
        fig.tight_layout()
        path = os.path.join(outdir, f"{stem}_correlations.png")
        fig.savefig(path, dpi=150)
        written.append(path)
    plt.close(fig)

    return written
