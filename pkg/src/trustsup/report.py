"""Figure rendering for the report outputs: descriptor shapes, threshold
traces, training loss, and the metrics table. PNGs land next to the CSVs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .decision import METRIC_ROWS, TrustedMetrics

__all__ = ["plot_usd_examples", "plot_series", "plot_metrics", "plot_feature_scatter"]


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(Path(path), dpi=120)
    plt.close(fig)


def plot_usd_examples(examples: list[tuple[str, np.ndarray]], path) -> None:
    """Bar plots of a few descriptors, one panel per (label, values) pair."""
    if not examples:
        return
    fig, axes = plt.subplots(1, len(examples), figsize=(4 * len(examples), 3), sharey=True)
    if len(examples) == 1:
        axes = [axes]
    for ax, (label, values) in zip(axes, examples):
        values = np.asarray(values, dtype=float)
        ax.bar(np.arange(values.size), values, width=1.0, color="tab:blue")
        ax.set_title(label, fontsize=10)
        ax.set_xlabel("descriptor index")
    axes[0].set_ylabel("activation")
    _save(fig, path)


def plot_series(series: list[tuple[str, np.ndarray, np.ndarray]], path,
                xlabel: str = "step", ylabel: str = "value", title: str = "") -> None:
    """Line plot of one or more (label, x, y) series."""
    if not series:
        return
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, xs, ys in series:
        ax.plot(xs, ys, label=label, linewidth=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend(fontsize=9)
    _save(fig, path)


def plot_metrics(columns: dict[str, TrustedMetrics], path) -> None:
    """Grouped bars: six metric rows, one bar group per evaluation mode."""
    if not columns:
        return
    labels = METRIC_ROWS
    modes = list(columns.keys())
    width = 0.8 / len(modes)
    xs = np.arange(len(labels))
    fig, ax = plt.subplots(figsize=(9, 4))
    for k, mode in enumerate(modes):
        ax.bar(xs + k * width, columns[mode].row_values(), width=width, label=mode)
    ax.set_xticks(xs + 0.4 - width / 2)
    ax.set_xticklabels(labels, rotation=20, ha="right", fontsize=8)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("value")
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_feature_scatter(x: np.ndarray, labels: np.ndarray, path, title: str = "") -> None:
    """First two feature dimensions colored by class."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] == 0 or x.shape[1] < 2:
        return
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(x[:, 0], x[:, 1], c=np.asarray(labels), s=6, cmap="tab10", alpha=0.7)
    ax.set_xlabel("x_0")
    ax.set_ylabel("x_1")
    if title:
        ax.set_title(title)
    _save(fig, path)
