"""Figure rendering for report artifacts. All figures go to files; no
interactive backends."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_heatmap(grid: np.ndarray, path: str, title: str = "Mean smell rating") -> None:
    """7x24 day-of-week by hour-of-day grid; missing cells stay blank."""
    fig, ax = plt.subplots(figsize=(9, 3.2))
    masked = np.ma.masked_invalid(grid)
    im = ax.imshow(masked, aspect="auto", cmap="YlOrRd", vmin=1, vmax=5)
    ax.set_yticks(range(7), ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"])
    ax.set_xticks(range(0, 24, 3))
    ax.set_xlabel("Hour of day")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_ngram_bars(grams: list[tuple[str, int]], path: str, title: str, top: int = 20) -> None:
    grams = grams[:top]
    fig, ax = plt.subplots(figsize=(6, max(2.5, 0.28 * len(grams))))
    if grams:
        names = [g for g, _ in grams][::-1]
        counts = [c for _, c in grams][::-1]
        ax.barh(names, counts, color="#4c72b0")
    ax.set_title(title)
    ax.set_xlabel("Count")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_metric_bars(results: list[dict], path: str) -> None:
    """Grouped precision/recall/F bars with std whiskers, one group per variant."""
    fig, ax = plt.subplots(figsize=(7, 3.5))
    variants = [r["variant"] for r in results]
    x = np.arange(len(variants))
    width = 0.26
    for i, metric in enumerate(("precision", "recall", "f")):
        means = [r[f"{metric}_mean"] for r in results]
        stds = [r[f"{metric}_std"] for r in results]
        ax.bar(x + (i - 1) * width, means, width, yerr=stds, capsize=3,
               label={"f": "F-score"}.get(metric, metric.capitalize()))
    ax.set_xticks(x, variants)
    ax.set_ylim(0, 1.05)
    ax.legend(loc="lower right")
    ax.set_title("Rolling cross-validation")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_importance_bars(importances: dict[str, float], path: str, top: int = 15) -> None:
    items = sorted(importances.items(), key=lambda kv: kv[1], reverse=True)[:top]
    fig, ax = plt.subplots(figsize=(7, max(2.5, 0.3 * len(items))))
    if items:
        names = [k for k, _ in items][::-1]
        vals = [v for _, v in items][::-1]
        ax.barh(names, vals, color="#55a868")
    ax.set_xlabel("Importance (impurity decrease)")
    ax.set_title("Interpretable tree feature importance")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
