"""Silence elimination: frame VAD, windowed aggregation, trimming and time mapping."""

from __future__ import annotations

import bisect
import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .audio import Waveform
from .clients import ASRClient, Transcript
from .errors import ClientError, FormatError, RangeError, TranscriptionError, ValidationError

log = logging.getLogger(__name__)

FRAME_MS_CHOICES = (10, 20, 30)
VAD_SAMPLE_RATES = (8000, 16000, 32000, 48000)
# dBFS speech threshold per aggressiveness level for the energy detector
ENERGY_THRESHOLDS_DB = {0: -55.0, 1: -50.0, 2: -45.0, 3: -40.0}


@dataclass(frozen=True)
class FrameDecisionSequence:
    frame_ms: int
    decisions: tuple[bool, ...]

    def __post_init__(self):
        if self.frame_ms not in FRAME_MS_CHOICES:
            raise FormatError(f"frame_ms must be one of {FRAME_MS_CHOICES}")
        object.__setattr__(self, "decisions", tuple(bool(d) for d in self.decisions))

    @property
    def frame_s(self) -> float:
        return self.frame_ms / 1000.0

    def __len__(self) -> int:
        return len(self.decisions)


def _check_vad_input(wav: Waveform, frame_ms: int, aggressiveness: int) -> None:
    if frame_ms not in FRAME_MS_CHOICES:
        raise FormatError(f"unsupported frame length {frame_ms} ms; use one of {FRAME_MS_CHOICES}")
    if wav.sample_rate not in VAD_SAMPLE_RATES:
        raise FormatError(f"unsupported sample rate {wav.sample_rate}; use one of {VAD_SAMPLE_RATES}")
    if aggressiveness not in ENERGY_THRESHOLDS_DB:
        raise ValidationError("aggressiveness must be 0..3", field="aggressiveness")


def _whole_frames(wav: Waveform, frame_ms: int) -> np.ndarray:
    n = wav.sample_rate * frame_ms // 1000
    count = len(wav) // n
    return wav.samples[: count * n].reshape(count, n)


def energy_vad(wav: Waveform, frame_ms: int = 30, aggressiveness: int = 2) -> FrameDecisionSequence:
    """Deterministic energy-threshold detector; the final partial frame is dropped."""
    _check_vad_input(wav, frame_ms, aggressiveness)
    frames = _whole_frames(wav, frame_ms)
    if frames.shape[0] == 0:
        return FrameDecisionSequence(frame_ms, ())
    rms = np.sqrt(np.mean(frames**2, axis=1))
    level = 20.0 * np.log10(np.maximum(rms, 1e-12))
    return FrameDecisionSequence(frame_ms, tuple(level >= ENERGY_THRESHOLDS_DB[aggressiveness]))


def webrtc_vad(wav: Waveform, frame_ms: int = 30, aggressiveness: int = 2) -> FrameDecisionSequence:
    import webrtcvad

    _check_vad_input(wav, frame_ms, aggressiveness)
    vad = webrtcvad.Vad(aggressiveness)
    frames = _whole_frames(wav, frame_ms)
    pcm = np.clip(np.round(frames * 32767.0), -32768, 32767).astype("<i2")
    return FrameDecisionSequence(
        frame_ms, tuple(vad.is_speech(row.tobytes(), wav.sample_rate) for row in pcm)
    )


def webrtc_available() -> bool:
    try:
        import webrtcvad  # noqa: F401
    except ImportError:
        return False
    return True


def vad_classify(
    wav: Waveform, frame_ms: int = 30, aggressiveness: int = 2, backend: str = "energy"
) -> FrameDecisionSequence:
    """Classify each whole frame as speech/nonspeech.

    ``backend`` is ``"energy"``, ``"webrtc"`` or ``"auto"`` (WebRTC when the
    ``webrtcvad`` package is importable, energy otherwise).
    """
    if backend == "auto":
        backend = "webrtc" if webrtc_available() else "energy"
    if backend == "webrtc":
        return webrtc_vad(wav, frame_ms, aggressiveness)
    if backend == "energy":
        return energy_vad(wav, frame_ms, aggressiveness)
    raise ValidationError(f"unknown VAD backend {backend!r}", field="vad.backend")


def aggregate_segments(
    decisions: FrameDecisionSequence, window_frames: int = 10, trigger_ratio: float = 0.9
) -> list[tuple[float, float]]:
    """Hysteresis over a sliding window of frame decisions.

    A segment opens once at least ``trigger_ratio`` of the window is speech
    (starting at the window's first speech frame) and closes once at least
    ``trigger_ratio`` is nonspeech (ending after the last speech frame seen).
    The window is cleared on every state change.
    """
    if window_frames < 1:
        raise ValidationError("window_frames must be >= 1", field="window_frames")
    if not 0 < trigger_ratio <= 1:
        raise ValidationError("trigger_ratio must be in (0, 1]", field="trigger_ratio")
    need = max(1, math.ceil(trigger_ratio * window_frames - 1e-9))
    fs = decisions.frame_s
    window: deque[tuple[int, bool]] = deque(maxlen=window_frames)
    voiced = 0
    triggered = False
    start = last_speech = 0
    spans: list[tuple[int, int]] = []
    for i, d in enumerate(decisions.decisions):
        if len(window) == window_frames and window[0][1]:
            voiced -= 1
        window.append((i, d))
        voiced += d
        if d:
            last_speech = i
        if not triggered:
            if voiced >= need:
                triggered = True
                start = next(j for j, v in window if v)
                window.clear()
                voiced = 0
        elif len(window) - voiced >= need:
            triggered = False
            spans.append((start, last_speech + 1))
            window.clear()
            voiced = 0
    if triggered:
        spans.append((start, last_speech + 1))
    return [(a * fs, b * fs) for a, b in spans]


@dataclass(frozen=True)
class AlignmentMap:
    """Kept spans of the original timeline, in ascending order."""

    kept_spans: tuple[tuple[float, float], ...]

    def __post_init__(self):
        spans = tuple((float(a), float(b)) for a, b in self.kept_spans)
        for a, b in spans:
            if b < a:
                raise ValidationError(f"span ({a}, {b}) is reversed", field="kept_spans")
        for (a0, b0), (a1, b1) in zip(spans, spans[1:]):
            if a1 < b0:
                raise ValidationError("kept spans overlap or are unsorted", field="kept_spans")
        object.__setattr__(self, "kept_spans", spans)

    @property
    def cumulative(self) -> list[float]:
        out, acc = [], 0.0
        for a, b in self.kept_spans:
            acc += b - a
            out.append(acc)
        return out

    @property
    def total_kept(self) -> float:
        return sum(b - a for a, b in self.kept_spans)

    def to_json(self) -> list[list[float]]:
        return [[a, b] for a, b in self.kept_spans]

    @classmethod
    def from_json(cls, spans: Sequence[Sequence[float]]) -> "AlignmentMap":
        return cls(tuple((float(a), float(b)) for a, b in spans))


def remove_silence(
    wav: Waveform, segments: Sequence[tuple[float, float]]
) -> tuple[Waveform, AlignmentMap]:
    """Concatenate the kept spans; returns the trimmed audio and its map."""
    sr = wav.sample_rate
    idx: list[tuple[int, int]] = []
    for start, end in segments:
        a = max(0, int(round(start * sr)))
        b = min(len(wav), int(round(end * sr)))
        if b <= a:
            continue
        if idx and a <= idx[-1][1]:
            idx[-1] = (idx[-1][0], max(idx[-1][1], b))
        else:
            idx.append((a, b))
    if not idx:
        return Waveform(np.zeros(0), sr), AlignmentMap(())
    trimmed = np.concatenate([wav.samples[a:b] for a, b in idx])
    return Waveform(trimmed, sr), AlignmentMap(tuple((a / sr, b / sr) for a, b in idx))


def map_to_original(align: AlignmentMap, t_trimmed: float) -> float:
    """Trimmed-domain time -> original time (piecewise linear, monotone).

    A time falling exactly on a junction belongs to the earlier span.
    """
    total = align.total_kept
    if not (-1e-9 <= t_trimmed <= total + 1e-9):
        raise RangeError(f"t={t_trimmed} outside [0, {total}]", field="t_trimmed")
    if not align.kept_spans:
        return 0.0
    t = min(max(t_trimmed, 0.0), total)
    cum = align.cumulative
    i = min(bisect.bisect_left(cum, t), len(cum) - 1)
    prev = cum[i - 1] if i > 0 else 0.0
    return align.kept_spans[i][0] + (t - prev)


def map_to_trimmed(align: AlignmentMap, t_original: float) -> float:
    """Original time -> trimmed time; times inside removed gaps snap to the junction."""
    acc = 0.0
    for a, b in align.kept_spans:
        if t_original < a:
            return acc
        if t_original <= b:
            return acc + (t_original - a)
        acc += b - a
    return acc


def transcribe(
    asr_client: ASRClient | None, wav: Waveform, manifest_text: str | None = None
) -> Transcript:
    """Run ASR, or return the stored manifest transcript verbatim when given."""
    if manifest_text is not None:
        return Transcript(manifest_text)
    if asr_client is None:
        raise TranscriptionError("no ASR client configured and no manifest transcript given")
    try:
        result = asr_client.transcribe(wav)
    except ClientError as exc:
        raise TranscriptionError(f"ASR failed: {exc}") from exc
    if result.char_timings:
        prev = -math.inf
        for ct in result.char_timings:
            if ct.start_s < prev - 1e-9 or ct.end_s < ct.start_s:
                raise TranscriptionError("ASR character timings are not monotone")
            prev = ct.start_s
    return result
