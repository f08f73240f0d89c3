"""Figures for sweep results: test accuracy against C."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .sweep import best_over_gamma, curves_by_gamma  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.6),
    "axes.labelsize": 11,
    "axes.titlesize": 11,
    "legend.fontsize": 8,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
    "lines.linewidth": 1.5,
    "lines.markersize": 4,
}


def plot_best_over_gamma(rows, path, title: str | None = None) -> None:
    """One curve per kernel: at each C, the best accuracy over all gammas."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for kernel, curve in sorted(best_over_gamma(rows).items()):
            cs, accs = zip(*curve)
            ax.plot(cs, accs, marker="o", label=kernel)
        _finish(ax, title)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_gamma_curves(rows, kernel: str, path, title: str | None = None) -> None:
    """Accuracy vs C for each gamma of one kernel, plus the best-over-gamma envelope."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for (g1, g2), curve in curves_by_gamma(rows, kernel).items():
            cs, accs = zip(*curve)
            name = f"γ={g1}" if not g2 else f"γ1={g1}, γ2={g2}"
            ax.plot(cs, accs, lw=0.8, alpha=0.6, label=name)
        env = best_over_gamma([r for r in rows if r[0] == kernel]).get(kernel)
        if env:
            cs, accs = zip(*env)
            ax.plot(cs, accs, color="k", lw=2, label="best over γ")
        _finish(ax, title or kernel)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def _finish(ax, title) -> None:
    ax.set_xscale("log")
    ax.set_xlabel("C")
    ax.set_ylabel("Accuracy (%)")
    ax.grid(True, which="major", alpha=0.3)
    ax.legend(loc="lower right")
    if title:
        ax.set_title(title)
