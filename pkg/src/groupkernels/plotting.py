"""Static SVG figures for the experiment reports.

All figures are 800 x 600 SVG user units.  Growth and decay plots use
log-log axes.  Output is reproducible: the SVG hash salt and the date
metadata are pinned.
"""

from __future__ import annotations

import os
from contextlib import contextmanager
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_STYLE = {
    "svg.hashsalt": "groupkernels",
    "svg.fonttype": "path",
    "font.size": 12,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.6,
    "lines.markersize": 5,
}
FIGSIZE = (800 / 72, 600 / 72)


@contextmanager
def figure(path, title: str = "", xlabel: str = "", ylabel: str = ""):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        try:
            yield ax
            ax.set_title(title)
            ax.set_xlabel(xlabel)
            ax.set_ylabel(ylabel)
            if ax.get_legend_handles_labels()[0]:
                ax.legend(loc="best")
            fig.tight_layout()
            save_svg(fig, path)
        finally:
            plt.close(fig)


def save_svg(fig, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    fig.savefig(tmp, format="svg", metadata={"Date": None})
    os.replace(tmp, path)


def plot_growth(report, path, group_name=""):
    r = np.asarray(report.radii[1:], dtype=float)
    b = np.asarray(report.ball_sizes[1:], dtype=float)
    with figure(path, f"Ball growth {group_name}", "1 + r", "#B(e, r)") as ax:
        ax.loglog(1 + r, b, "o-", label="ball size")
        fit = report.growth_constant * (1 + r) ** report.degree_estimate
        ax.loglog(1 + r, fit, "--", label=f"fit c(1+r)^t, t = {report.degree_estimate:.3f}")


def plot_truncation(ns, exact, bound, path):
    with figure(path, "Truncation error", "n", "weighted norm of T - T_n") as ax:
        ex = np.asarray(exact, dtype=float)
        mask = ex > 0
        ax.semilogy(np.asarray(ns)[mask], ex[mask], "o-", label="exact")
        ax.semilogy(ns, bound, "s--", label="bound (2+n)^-r ||T||_{a+r}")


def plot_decay(lengths, values, b, path):
    lengths = np.asarray(lengths, dtype=float)
    values = np.asarray(values, dtype=float)
    with figure(path, "Envelope decay of the inverse", "1 + l(gamma)", "envelope") as ax:
        ax.loglog(1 + lengths, values, "o", label="envelope by word length")
        if np.isfinite(b) and lengths.size:
            ref = values[0] * ((1 + lengths) / (1 + lengths[0])) ** (-b)
            ax.loglog(1 + lengths, ref, "--", label=f"power law, b = {b:.2f}")


def plot_norm_trace(trace, rhs, path):
    radii = [r for r, _ in trace]
    vals = [v for _, v in trace]
    with figure(path, "Finite-section operator norm", "window radius R", "norm") as ax:
        ax.plot(radii, vals, "o-", label="||T||_2 on B(e, R)")
        if rhs is not None:
            ax.axhline(rhs, color="C3", ls="--", label="C0 ||T||_a")


def plot_powers(powers, norms, norm_2, path):
    k = np.asarray(powers, dtype=float)
    with figure(path, "Weighted norms of powers", "k", "norm") as ax:
        ax.semilogy(k, norms, "o-", label="||T^k||_a")
        ax.semilogy(k, norm_2 ** k, "s--", label="||T||_2^k")


def plot_neumann_trace(trace, path):
    with figure(path, "Neumann partial sums", "iteration k", "||S_k||_a") as ax:
        for a, vals in trace.items():
            ax.plot(range(len(vals)), vals, label=f"a = {a:g}")
