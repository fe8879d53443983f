"""Per-segment speaking-style analysis: pitch, energy, speed and speaker profile."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .audio import Waveform
from .core import (
    AttributeSequence,
    EmotionLabel,
    SegmentAttributes,
    SpeakerProfile,
    TimedSegment,
    UtteranceManifest,
    collapse_runs,
)
from .errors import AlignmentError, UnvoicedSignalError, ValidationError

PITCH_FMIN = 60.0
PITCH_FMAX = 400.0
ENERGY_FLOOR_DB = -120.0
_CJK_RE = re.compile(r"[\u3400-\u4dbf\u4e00-\u9fff\uf900-\ufaff]")


def _frames(x: np.ndarray, frame: int, hop: int) -> np.ndarray:
    if x.size < frame:
        return np.empty((0, frame))
    n = 1 + (x.size - frame) // hop
    idx = np.arange(frame)[None, :] + hop * np.arange(n)[:, None]
    return x[idx]


def pitch_track(
    wav: Waveform,
    fmin: float = PITCH_FMIN,
    fmax: float = PITCH_FMAX,
    frame_s: float = 0.04,
    hop_s: float = 0.01,
    voicing_threshold: float = 0.6,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame best lag (fractional samples, NaN when unvoiced) and NCCF peak."""
    sr = wav.sample_rate
    frame = int(round(frame_s * sr))
    hop = max(1, int(round(hop_s * sr)))
    lag_min = max(2, int(np.floor(sr / fmax)))
    lag_max = int(np.ceil(sr / fmin))
    if frame <= 2 * lag_max:
        frame = 2 * lag_max + 1
    frames = _frames(wav.samples, frame, hop)
    if frames.shape[0] == 0:
        return np.empty(0), np.empty(0)
    frames = frames - frames.mean(axis=1, keepdims=True)
    rms = np.sqrt(np.mean(frames**2, axis=1))

    n = frames.shape[1]
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(frames, nfft, axis=1)
    acf = np.fft.irfft(spec * np.conj(spec), nfft, axis=1)[:, : lag_max + 2]
    # energies of the leading and trailing windows for each lag
    csum = np.concatenate([np.zeros((frames.shape[0], 1)), np.cumsum(frames**2, axis=1)], axis=1)
    lags = np.arange(acf.shape[1])
    e_head = csum[:, n - lags]  # sum x[0 : n-L]
    e_tail = csum[:, [n]] - csum[:, lags]  # sum x[L : n]
    nccf = acf / np.sqrt(np.maximum(e_head * e_tail, 1e-20))

    best_lag = np.full(frames.shape[0], np.nan)
    peak = np.zeros(frames.shape[0])
    band = nccf[:, lag_min : lag_max + 1]
    for i in range(frames.shape[0]):
        if rms[i] < 1e-4:
            continue
        r = band[i]
        top = r.max()
        if top < voicing_threshold:
            continue
        # earliest local maximum near the global one avoids octave-down errors
        cand = np.flatnonzero(
            (r[1:-1] >= r[:-2]) & (r[1:-1] >= r[2:]) & (r[1:-1] >= 0.9 * top)
        )
        j = int(cand[0] + 1) if cand.size else int(np.argmax(r))
        lag = float(j + lag_min)
        if 0 < j < r.size - 1:
            a, b, c = r[j - 1], r[j], r[j + 1]
            denom = a - 2 * b + c
            if denom < 0:
                lag += 0.5 * (a - c) / denom
        best_lag[i] = lag
        peak[i] = top
    return best_lag, peak


def estimate_pitch(wav: Waveform, fmin: float = PITCH_FMIN, fmax: float = PITCH_FMAX) -> float:
    """Mean F0 in Hz over voiced frames (normalized autocorrelation)."""
    lags, _ = pitch_track(wav, fmin, fmax)
    voiced = lags[np.isfinite(lags)]
    if voiced.size == 0:
        raise UnvoicedSignalError("no voiced frames found")
    return float(np.mean(wav.sample_rate / voiced))


def estimate_energy(wav: Waveform, floor_db: float = ENERGY_FLOOR_DB) -> float:
    """Mean RMS level in dBFS, clamped at ``floor_db``."""
    rms = wav.rms
    if rms <= 0:
        return floor_db
    return max(floor_db, 20.0 * np.log10(rms))


class SpeedEstimate(NamedTuple):
    value: float
    empty_transcript: bool = False


def count_text_units(text: str, language: str) -> int:
    if language == "zh":
        return len(_CJK_RE.findall(text))
    return len(text.split())


def estimate_speed(transcript: str, duration_s: float, language: str) -> SpeedEstimate:
    """Words/s for English, CJK characters/s for Chinese."""
    if duration_s <= 0:
        raise ValidationError("duration must be positive", field="duration_s")
    units = count_text_units(transcript, language)
    if units == 0:
        return SpeedEstimate(0.0, True)
    return SpeedEstimate(units / duration_s, False)


def categorize(value: float, bounds: tuple[float, float], labels: tuple[str, str, str]) -> str:
    """Half-open bins: (-inf, lo), [lo, hi), [hi, inf)."""
    lo, hi = bounds
    if value < lo:
        return labels[0]
    if value < hi:
        return labels[1]
    return labels[2]


LEVELS = ("low", "medium", "high")
SPEEDS = ("slow", "medium", "fast")


@dataclass(frozen=True)
class AttributeThresholds:
    pitch_hz: tuple[float, float] = (140.0, 220.0)
    energy_db: tuple[float, float] = (-30.0, -20.0)
    speed: dict[str, tuple[float, float]] = field(
        default_factory=lambda: {"en": (2.5, 4.0), "zh": (3.5, 5.5)}
    )

    def with_energy_tertiles(self, energies: Sequence[float]) -> "AttributeThresholds":
        vals = np.asarray([e for e in energies if np.isfinite(e)], dtype=float)
        if vals.size < 3:
            return self
        lo, hi = np.quantile(vals, [1 / 3, 2 / 3])
        return AttributeThresholds(self.pitch_hz, (float(lo), float(hi)), dict(self.speed))


@dataclass(frozen=True)
class SegmentAnalysis:
    start_s: float
    end_s: float
    emotion: EmotionLabel
    transcript: str
    pitch_hz: float
    energy_db: float
    speed_ups: float
    language: str = "en"


def analyze_segment(
    wav: Waveform, segment: TimedSegment, transcript: str, language: str
) -> SegmentAnalysis:
    """Run the three estimators on ``wav`` (already cut to ``segment``)."""
    try:
        pitch = estimate_pitch(wav)
    except UnvoicedSignalError:
        pitch = 0.0
    return SegmentAnalysis(
        start_s=segment.start_s,
        end_s=segment.end_s,
        emotion=segment.emotion,
        transcript=transcript,
        pitch_hz=pitch,
        energy_db=estimate_energy(wav),
        speed_ups=estimate_speed(transcript, segment.duration, language).value,
        language=language,
    )


def build_attribute_sequence(
    manifest: UtteranceManifest | None,
    segments: Sequence[TimedSegment],
    analyses: Sequence[SegmentAnalysis],
    profile: SpeakerProfile,
    thresholds: AttributeThresholds | None = None,
) -> AttributeSequence:
    """Align analyses to segments (any input order) and derive categories.

    When ``manifest`` is given the resulting emotion sequence must equal its
    plan, otherwise :class:`AlignmentError` is raised.
    """
    thresholds = thresholds or AttributeThresholds()
    if len(segments) != len(analyses):
        raise AlignmentError(f"{len(segments)} segments but {len(analyses)} analyses")
    segs = sorted(segments, key=lambda s: s.start_s)
    ans = sorted(analyses, key=lambda a: a.start_s)
    for a, b in zip(segs, segs[1:]):
        if abs(b.start_s - a.end_s) > 1e-3:
            raise AlignmentError(f"segments do not tile: gap/overlap at {a.end_s:.3f}s")
    out = []
    for seg, an in zip(segs, ans):
        if abs(seg.start_s - an.start_s) > 1e-3 or abs(seg.end_s - an.end_s) > 1e-3:
            raise AlignmentError(
                f"analysis span ({an.start_s:.3f}, {an.end_s:.3f}) does not match segment "
                f"({seg.start_s:.3f}, {seg.end_s:.3f})"
            )
        if an.emotion != seg.emotion:
            raise AlignmentError(
                f"analysis emotion {an.emotion.value} differs from segment {seg.emotion.value}"
            )
        lang = an.language if an.language in thresholds.speed else "en"
        out.append(
            SegmentAttributes(
                start_s=seg.start_s,
                end_s=seg.end_s,
                emotion=seg.emotion,
                transcript=an.transcript,
                pitch_hz=an.pitch_hz,
                pitch_cat=categorize(an.pitch_hz, thresholds.pitch_hz, LEVELS),
                energy_db=an.energy_db,
                energy_cat=categorize(an.energy_db, thresholds.energy_db, LEVELS),
                speed_ups=an.speed_ups,
                speed_cat=categorize(an.speed_ups, thresholds.speed[lang], SPEEDS),
            )
        )
    if manifest is not None:
        got = collapse_runs(s.emotion for s in out)
        if got != manifest.plan.emotions:
            raise AlignmentError(
                f"segment emotions {[e.value for e in got]} do not match plan {manifest.plan}"
            )
    return AttributeSequence(profile=profile, segments=tuple(out))
