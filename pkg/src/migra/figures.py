"""Report charts: metric comparison and feature importances.

Rendering is headless (Agg); functions return the paths they wrote.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .pipeline import METRIC_NAMES, RunReport


def metric_chart(report: RunReport, path) -> Path:
    """One panel per metric: bar per model, whisker = std across triplets."""
    agg = report.aggregate()
    names = [n for n in report.model_names() if n in agg]
    fig, axes = plt.subplots(2, 3, figsize=(13, 7))
    x = np.arange(len(names))
    for ax, metric in zip(axes.ravel(), METRIC_NAMES):
        means = [agg[n][metric][0] for n in names]
        stds = [agg[n][metric][1] for n in names]
        ax.bar(x, means, yerr=stds, capsize=3, color="#4878a8")
        ax.set_title(metric)
        ax.set_xticks(x)
        ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
        ax.grid(axis="y", alpha=0.3)
    fig.suptitle("test-set performance, mean ± std across triplets")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def importance_chart(report: RunReport, path, top: int = 10) -> Path | None:
    """Horizontal bars for the strongest features; None when the run
    had no tree model to read importances from."""
    imp = report.mean_importances()[:top]
    if not imp:
        return None
    feats = [f for f, _ in imp][::-1]
    vals = [v for _, v in imp][::-1]
    fig, ax = plt.subplots(figsize=(8, 0.5 * len(feats) + 1.5))
    ax.barh(np.arange(len(feats)), vals, color="#4878a8")
    ax.set_yticks(np.arange(len(feats)))
    ax.set_yticklabels(feats, fontsize=9)
    ax.set_xlabel("share of squared-error reduction")
    ax.set_title(f"top {len(feats)} features")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_report_figures(report: RunReport, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [metric_chart(report, out_dir / "metrics.png")]
    imp = importance_chart(report, out_dir / "importances.png")
    if imp is not None:
        written.append(imp)
    return written
