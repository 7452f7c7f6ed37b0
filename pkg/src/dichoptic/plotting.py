"""Static chart emission for analysis results."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .analysis import PositionMatrix, SummaryReport
from .scenes import SET_KINDS


def accuracy_chart(report: SummaryReport, path: str | Path) -> Path:
    """Bar chart of mean detection accuracy per set kind, with SD bars."""
    kinds = [k for k in SET_KINDS if k in report.per_set]
    means = [report.per_set[k].mean_accuracy for k in kinds]
    sds = [report.per_set[k].sd_accuracy for k in kinds]
    fig, ax = plt.subplots(figsize=(7, 4))
    x = np.arange(len(kinds))
    ax.bar(x, means, yerr=sds, capsize=4, color="#4878a8")
    ax.set_xticks(x)
    ax.set_xticklabels(kinds, rotation=20, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("accuracy")
    ax.set_title("Detection accuracy per set")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def tlx_chart(aggregate: dict, path: str | Path) -> Path:
    """Grouped bars of questionnaire means per block label."""
    labels = sorted(aggregate)
    items = sorted({name for block in aggregate.values() for name in block})
    fig, ax = plt.subplots(figsize=(9, 4))
    width = 0.8 / max(len(labels), 1)
    x = np.arange(len(items))
    for i, label in enumerate(labels):
        means = [aggregate[label].get(item, (np.nan, 0.0))[0] for item in items]
        sds = [aggregate[label].get(item, (np.nan, 0.0))[1] for item in items]
        ax.bar(x + i * width, means, width=width, yerr=sds, capsize=3, label=label)
    ax.set_xticks(x + width * (len(labels) - 1) / 2)
    ax.set_xticklabels(items, rotation=25, ha="right")
    ax.set_ylabel("score")
    ax.set_title("Questionnaire results")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def position_heatmap(matrix: PositionMatrix, path: str | Path) -> Path:
    """Heat map of per-cell detection success rates."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    shown = np.ma.masked_invalid(matrix.rates)
    im = ax.imshow(shown, vmin=0.0, vmax=1.0, cmap="viridis")
    rows, cols = matrix.rates.shape
    for r in range(rows):
        for c in range(cols):
            if not np.isnan(matrix.rates[r, c]):
                ax.text(c, r, f"{matrix.rates[r, c]:.2f}", ha="center", va="center",
                        color="white", fontsize=8)
    title = "Detection success per position"
    if matrix.depth_plane is not None:
        title += f" (plane {matrix.depth_plane})"
    ax.set_title(title)
    ax.set_xlabel("column")
    ax.set_ylabel("row")
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
