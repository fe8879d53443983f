"""Frame posteriors -> smoothed emotion segments, and their annotation string."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import EMOTIONS, EmotionLabel, TimedSegment, format_timestamp, parse_timestamp
from ..errors import ValidationError

_DISPLAY_TO_LABEL = {e.display: e for e in EmotionLabel}


@dataclass(frozen=True)
class Smoothing:
    median_frames: int = 25
    min_segment_s: float = 0.5


def mode_filter(labels: np.ndarray, width: int, n_classes: int = len(EMOTIONS)) -> np.ndarray:
    """Sliding majority vote (the categorical analogue of a median filter).

    Windows are centered and truncated at the edges; ties keep the frame's own
    label when it is among the winners, otherwise the lowest class index.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if width <= 1 or labels.size == 0:
        return labels.copy()
    half = width // 2
    T = labels.size
    onehot = np.zeros((T + 1, n_classes), dtype=np.int64)
    onehot[np.arange(1, T + 1), labels] = 1
    csum = np.cumsum(onehot, axis=0)
    lo = np.clip(np.arange(T) - half, 0, T)
    hi = np.clip(np.arange(T) + half + 1, 0, T)
    counts = csum[hi] - csum[lo]
    best = counts.max(axis=1)
    out = counts.argmax(axis=1)
    keep = counts[np.arange(T), labels] == best
    out[keep] = labels[keep]
    return out


def _runs(labels: np.ndarray) -> list[list[int]]:
    """[label, start, end) runs."""
    edges = np.flatnonzero(np.diff(labels)) + 1
    starts = np.concatenate([[0], edges])
    ends = np.concatenate([edges, [labels.size]])
    return [[int(labels[a]), int(a), int(b)] for a, b in zip(starts, ends)]


def merge_short_runs(runs: list[list[int]], min_frames: float) -> list[list[int]]:
    """Absorb the shortest too-short run into its longer neighbor until none remain."""
    runs = [list(r) for r in runs]
    while len(runs) > 1:
        lengths = [b - a for _, a, b in runs]
        i = int(np.argmin(lengths))
        if lengths[i] >= min_frames:
            break
        if i == 0:
            j = 1
        elif i == len(runs) - 1:
            j = i - 1
        else:
            j = i - 1 if lengths[i - 1] >= lengths[i + 1] else i + 1
        runs[i][0] = runs[j][0]
        merged: list[list[int]] = []
        for r in runs:
            if merged and merged[-1][0] == r[0]:
                merged[-1][2] = r[2]
            else:
                merged.append(r)
        runs = merged
    return runs


def decode_labels(
    labels: np.ndarray, frame_rate: float = 50.0, smoothing: Smoothing | None = None
) -> list[TimedSegment]:
    smoothing = smoothing or Smoothing()
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        return []
    smoothed = mode_filter(labels, smoothing.median_frames)
    # one frame of quantization slack so a segment of exactly min_segment_s survives
    min_frames = smoothing.min_segment_s * frame_rate - 1.0
    runs = merge_short_runs(_runs(smoothed), min_frames)
    return [TimedSegment(a / frame_rate, b / frame_rate, EMOTIONS[c]) for c, a, b in runs]


def decode(
    dia_probs: np.ndarray, frame_rate: float = 50.0, smoothing: Smoothing | None = None
) -> list[TimedSegment]:
    """Argmax, majority smoothing, short-run merging, then timed segments covering [0, T/fr]."""
    probs = np.asarray(dia_probs, dtype=float)
    if probs.ndim != 2 or probs.shape[1] != len(EMOTIONS):
        raise ValidationError(f"expected T x {len(EMOTIONS)} probabilities", field="dia_probs")
    return decode_labels(probs.argmax(axis=1), frame_rate, smoothing)


def format_segments(segments: Sequence[TimedSegment]) -> str:
    return "; ".join(
        f'start_time: {format_timestamp(s.start_s)}, end_time: {format_timestamp(s.end_s)}, '
        f'emotion: "{s.emotion.display}"'
        for s in segments
    )


_ENTRY_RE = re.compile(
    r'start_time:\s*(\d{2}:\d{2}),\s*end_time:\s*(\d{2}:\d{2}),\s*emotion:\s*"([A-Za-z]+)"'
)


def parse_segments(text: str) -> list[TimedSegment]:
    """Inverse of :func:`format_segments` (second resolution)."""
    out = []
    for m in _ENTRY_RE.finditer(text):
        name = m.group(3)
        emotion = _DISPLAY_TO_LABEL.get(name) or EmotionLabel.parse(name)
        out.append(TimedSegment(parse_timestamp(m.group(1)), parse_timestamp(m.group(2)), emotion))
    return out
