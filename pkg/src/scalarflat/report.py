"""Figures written next to the CSV tables.

Every figure is a plain line/scatter plot rendered with the Agg backend;
PNG metadata is stripped of the software tag so reruns are byte-identical.
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.5, 3.6),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.3,
    "savefig.dpi": 120,
}


def write_rows(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def line_plot(path, x, series: dict, xlabel: str, ylabel: str, title: str = "",
              logx: bool = False, logy: bool = False, marker: str | None = None) -> Path:
    """One axes, one line per entry of ``series`` (label -> y values)."""
    path = Path(path)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, y in series.items():
            y = np.asarray(y, dtype=float)
            if logy:
                y = np.abs(y)
            ax.plot(x, y, label=label, marker=marker)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(series) > 1:
            ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
    return path


def slope_plot(path, xs, ys, slope: float, intercept: float, xlabel: str, ylabel: str) -> Path:
    """Log-log scatter with the fitted power law overlaid."""
    path = Path(path)
    xs = np.asarray(xs, dtype=float)
    ys = np.abs(np.asarray(ys, dtype=float))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.loglog(xs, ys, "o", label="measured")
        xx = np.geomspace(xs.min(), xs.max(), 50)
        ax.loglog(xx, np.exp(intercept) * xx**slope, "--", label=f"slope {slope:.3f}")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
    return path


def sign_map(path, R, Q, lam) -> Path:
    """Sign of lambda on an (R, Q) grid, log axes."""
    path = Path(path)
    lam = np.asarray(lam, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        sc = ax.scatter(R, Q, c=np.sign(lam), cmap="coolwarm", vmin=-1, vmax=1, s=60, edgecolors="k")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("R")
        ax.set_ylabel("Q")
        fig.colorbar(sc, ax=ax, label="sign of lambda")
        fig.tight_layout()
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
    return path
