"""Report figures, rendered off-screen to image files."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .core import EMOTIONS  # noqa: E402

STYLE = {
    "figure.dpi": 110,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
}
EMOTION_COLORS = {
    "angry": "#c0392b",
    "happy": "#f1c40f",
    "neutral": "#95a5a6",
    "sad": "#2e86c1",
    "surprised": "#8e44ad",
}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def loss_curve(history: Sequence[Mapping[str, float]], path) -> Path:
    with plt.rc_context(STYLE):
        fig, (ax, ax_s) = plt.subplots(1, 2, figsize=(8, 3))
        epochs = [h["epoch"] for h in history]
        for key in ("total", "dia", "det"):
            ax.plot(epochs, [h[key] for h in history], marker="o", ms=3, label=key)
        ax.set_xlabel("epoch")
        ax.set_ylabel("loss")
        ax.legend(frameon=False)
        for key in ("s_dia", "s_det"):
            if key in history[0]:
                ax_s.plot(epochs, [h[key] for h in history], marker="o", ms=3, label=key)
        ax_s.set_xlabel("epoch")
        ax_s.set_ylabel("log variance")
        ax_s.legend(frameon=False)
        return _save(fig, path)


def per_k_bars(values: Mapping[str, Mapping[int, float]], path, ylabel: str = "%") -> Path:
    """Grouped bars: one group per transition count, one bar per metric."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 3))
        ks = sorted({k for v in values.values() for k in v})
        width = 0.8 / max(1, len(values))
        for i, (name, per_k) in enumerate(values.items()):
            xs = np.arange(len(ks)) + i * width
            ys = [per_k.get(k, np.nan) for k in ks]
            ax.bar(xs, [0 if y is None else y for y in ys], width, label=name)
        ax.set_xticks(np.arange(len(ks)) + width * (len(values) - 1) / 2)
        ax.set_xticklabels([f"k={k}" for k in ks])
        ax.set_ylabel(ylabel)
        ax.legend(frameon=False, fontsize=8)
        return _save(fig, path)


def frame_timeline(
    true_labels: np.ndarray, pred_labels: np.ndarray, det_scores: np.ndarray, frame_rate: float, path
) -> Path:
    """Reference vs. predicted emotion strips above the boundary score track."""
    with plt.rc_context(STYLE):
        fig, (ax, ax_d) = plt.subplots(2, 1, figsize=(8, 3), sharex=True, height_ratios=[1, 1.2])
        T = len(true_labels)
        t = np.arange(T) / frame_rate
        seen = set()
        for row, labels in ((1, true_labels), (0, pred_labels)):
            for i, e in enumerate(EMOTIONS):
                mask = labels == i
                if mask.any():
                    ax.fill_between(t, row, row + 0.8, where=mask, color=EMOTION_COLORS[e.value],
                                    step="post", label=None if e in seen else e.value)
                    seen.add(e)
        ax.set_yticks([0.4, 1.4])
        ax.set_yticklabels(["predicted", "reference"])
        ax.grid(False)
        ax.legend(ncol=5, frameon=False, fontsize=7, loc="upper center", bbox_to_anchor=(0.5, 1.35))
        ax_d.plot(t, det_scores, lw=0.8, color="k")
        ax_d.set_ylabel("boundary p")
        ax_d.set_xlabel("time (s)")
        return _save(fig, path)


def confusion(matrix: np.ndarray, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4, 3.5))
        norm = matrix / np.maximum(matrix.sum(axis=1, keepdims=True), 1)
        im = ax.imshow(norm, vmin=0, vmax=1, cmap="Blues")
        names = [e.value for e in EMOTIONS]
        ax.set_xticks(range(len(names)), names, rotation=45, ha="right")
        ax.set_yticks(range(len(names)), names)
        ax.set_xlabel("predicted")
        ax.set_ylabel("reference")
        ax.grid(False)
        fig.colorbar(im, ax=ax, fraction=0.046)
        return _save(fig, path)


def distributions(groups: Mapping[str, Sequence[float]], path, xlabel: str) -> Path:
    """Box plot per group (e.g. utterance durations per table column)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4, 0.8 * len(groups) + 2), 3))
        labels = list(groups)
        data = [list(groups[k]) or [np.nan] for k in labels]
        ax.boxplot(data, showfliers=False)
        ax.set_xticks(range(1, len(labels) + 1), labels, rotation=30, ha="right")
        ax.set_ylabel(xlabel)
        return _save(fig, path)
