"""Frame-level training targets for the transition recognizer."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import EMOTIONS, TimedSegment
from ..errors import TargetError

FRAME_RATE = 50.0
DILATION_FRAMES = 2


@dataclass(frozen=True)
class FrameTargets:
    dia: np.ndarray  # (T,) int64 class indices into EMOTIONS
    det: np.ndarray  # (T,) float32 in {0, 1}

    def __post_init__(self):
        dia = np.asarray(self.dia, dtype=np.int64)
        det = np.asarray(self.det, dtype=np.float32)
        if dia.ndim != 1 or dia.shape != det.shape:
            raise TargetError(f"dia/det shapes differ: {dia.shape} vs {det.shape}")
        if dia.size and (dia.min() < 0 or dia.max() >= len(EMOTIONS)):
            raise TargetError("dia labels out of range")
        object.__setattr__(self, "dia", dia)
        object.__setattr__(self, "det", det)

    def __len__(self) -> int:
        return int(self.dia.shape[0])

    def one_hot(self) -> np.ndarray:
        return np.eye(len(EMOTIONS), dtype=np.float32)[self.dia]


def frame_count(duration_s: float, frame_rate: float = FRAME_RATE) -> int:
    return max(1, math.ceil(duration_s * frame_rate - 1e-9))


def boundary_frame(t: float, frame_rate: float = FRAME_RATE) -> int:
    """First frame whose center lies at or after ``t``."""
    return math.ceil(t * frame_rate - 0.5 - 1e-9)


def make_frame_targets(
    segments: Sequence[TimedSegment],
    frame_rate: float = FRAME_RATE,
    T: int | None = None,
    dilation_frames: int = DILATION_FRAMES,
) -> FrameTargets:
    """Per-frame emotion classes and dilated boundary pulses.

    Frame ``t`` takes the class of the segment holding its center
    ``(t + 0.5) / frame_rate``.  Boundaries are only placed where the
    emotion actually changes.
    """
    if not segments:
        raise TargetError("no segments")
    segs = list(segments)
    slack = 1.0 / frame_rate + 1e-9
    if segs[0].start_s > slack:
        raise TargetError(f"first segment starts at {segs[0].start_s:.3f}s, not 0")
    for a, b in zip(segs, segs[1:]):
        if abs(b.start_s - a.end_s) > slack:
            raise TargetError(f"gap or overlap between {a.end_s:.3f}s and {b.start_s:.3f}s")
    if T is None:
        T = frame_count(segs[-1].end_s, frame_rate)
    if T < 1:
        raise TargetError("T must be >= 1")
    if abs(T / frame_rate - segs[-1].end_s) > slack:
        raise TargetError(f"segments end at {segs[-1].end_s:.3f}s but T covers {T / frame_rate:.3f}s")

    dia = np.empty(T, dtype=np.int64)
    det = np.zeros(T, dtype=np.float32)
    starts = [0] + [min(max(boundary_frame(s.start_s, frame_rate), 0), T) for s in segs[1:]]
    ends = starts[1:] + [T]
    for seg, a, b in zip(segs, starts, ends):
        dia[a:b] = seg.emotion.index
    for prev, seg, b in zip(segs, segs[1:], starts[1:]):
        if prev.emotion == seg.emotion or b >= T:
            continue
        det[max(0, b - dilation_frames) : b + dilation_frames + 1] = 1.0
    return FrameTargets(dia, det)


def boundary_frames(targets: FrameTargets) -> list[int]:
    """Frames where the dia label changes (the undilated boundary positions)."""
    return [int(t) for t in np.flatnonzero(np.diff(targets.dia)) + 1]
