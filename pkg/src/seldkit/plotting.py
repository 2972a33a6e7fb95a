"""Report figures.

Figures are drawn on bare Agg canvases (no pyplot state) and saved without a
software stamp, so the same data always gives the same PNG bytes.
"""

from __future__ import annotations

import io
import math

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from seldkit.container import atomic_write_bytes

GOLDEN = (math.sqrt(5) - 1.0) / 2.0
PNG_METADATA = {"Software": None}


def new_figure(width: float = 7.0, height: float | None = None, ncols: int = 1):
    fig = Figure(figsize=(width, height or width * GOLDEN), dpi=100)
    FigureCanvasAgg(fig)
    axes = fig.subplots(1, ncols, squeeze=False)[0]
    for ax in axes:
        ax.spines["top"].set_visible(False)
        ax.spines["right"].set_visible(False)
    return fig, axes


def save(fig: Figure, path) -> None:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", metadata=PNG_METADATA)
    atomic_write_bytes(path, buf.getvalue())


def plot_study(report, path) -> None:
    """F1/F1o and DOAE per fusion mode with 95% CI bars."""
    modes = list(report.modes)
    x = np.arange(len(modes))
    fig, (ax1, ax2) = new_figure(9.0, 3.6, ncols=2)
    w = 0.38
    for off, metric, label in ((-w / 2, "f1", "F1"), (w / 2, "f1_on", "F1o")):
        means = [report.mean(m, metric) for m in modes]
        errs = [0.0 if math.isnan(e) else e for e in (report.ci95(m, metric) for m in modes)]
        ax1.bar(x + off, means, w, yerr=errs, label=label, capsize=2)
    ax1.set_ylabel("score [%]")
    ax1.legend(frameon=False, ncols=2, loc="lower center", bbox_to_anchor=(0.5, 1.0))
    means = [report.mean(m, "doae") for m in modes]
    errs = [0.0 if math.isnan(e) else e for e in (report.ci95(m, "doae") for m in modes)]
    ax2.bar(x, means, 0.6, yerr=errs, color="tab:gray", capsize=2)
    ax2.set_ylabel("DOAE [deg]")
    for ax in (ax1, ax2):
        ax.set_xticks(x)
        ax.set_xticklabels(modes, rotation=35, ha="right")
    fig.tight_layout()
    save(fig, path)


def plot_per_class(report, path) -> None:
    classes = list(report.per_class)
    x = np.arange(len(classes))
    fig, (ax,) = new_figure(7.0)
    ax.bar(x - 0.2, [report.per_class[c].f1 for c in classes], 0.4, label="F1")
    ax.bar(x + 0.2, [report.per_class[c].f1_on for c in classes], 0.4, label="F1o")
    ax.set_xticks(x)
    ax.set_xticklabels([str(c) for c in classes])
    ax.set_xlabel("class")
    ax.set_ylabel("score [%]")
    ax.set_ylim(0, 100)
    ax.legend(frameon=False, ncols=2, loc="lower center", bbox_to_anchor=(0.5, 1.0))
    fig.tight_layout()
    save(fig, path)


def plot_features(stack, path) -> None:
    """One panel per feature plane, time on x, mel bin on y."""
    n = stack.planes.shape[0]
    fig, axes = new_figure(3.2 * n, 2.8, ncols=n)
    for ax, plane, label in zip(axes, stack.planes, stack.labels):
        im = ax.imshow(plane.T, origin="lower", aspect="auto", interpolation="nearest")
        ax.set_title(label)
        ax.set_xlabel("frame")
        fig.colorbar(im, ax=ax, fraction=0.05)
    axes[0].set_ylabel("mel bin")
    fig.tight_layout()
    save(fig, path)
