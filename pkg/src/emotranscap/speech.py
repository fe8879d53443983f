"""Sentence-wise emotional synthesis, SER gating, loudness matching and concatenation."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .audio import Waveform
from .clients import SERClient, TTSClient
from .core import EmotionLabel, TimedSegment
from .errors import CatalogError, ConsistencyError, FormatError, NormalizationError, ValidationError
from .rng import substream_seed

log = logging.getLogger(__name__)

SILENCE_RMS = 1e-4
MAX_ATTEMPTS = 5


@dataclass
class ReferenceCatalog:
    """(speaker, emotion) -> reference prompt key."""

    entries: dict[tuple[str, EmotionLabel], str] = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, data: dict[str, dict[str, str]]) -> "ReferenceCatalog":
        return cls(
            {(spk, EmotionLabel.parse(emo)): key for spk, refs in data.items() for emo, key in refs.items()}
        )

    @classmethod
    def load(cls, path: str | Path) -> "ReferenceCatalog":
        return cls.from_mapping(json.loads(Path(path).read_text(encoding="utf-8")))

    @classmethod
    def fallback(cls, speakers: Iterable[str]) -> "ReferenceCatalog":
        from .fallback import fallback_reference_key

        return cls({(s, e): fallback_reference_key(s, e) for s in speakers for e in EmotionLabel})

    @property
    def speakers(self) -> list[str]:
        return sorted({spk for spk, _ in self.entries})

    def validate(self, speakers: Iterable[str] | None = None) -> None:
        """Every speaker must cover all five emotions."""
        for spk in speakers if speakers is not None else self.speakers:
            missing = [e.value for e in EmotionLabel if (spk, e) not in self.entries]
            if missing:
                raise CatalogError(f"speaker {spk!r} lacks references for {missing}")


def select_reference(catalog: ReferenceCatalog, speaker_id: str, emotion: EmotionLabel | str) -> str:
    emotion = EmotionLabel.parse(emotion)
    try:
        return catalog.entries[(speaker_id, emotion)]
    except KeyError:
        raise CatalogError(f"no reference for speaker {speaker_id!r} / {emotion.value}") from None


@dataclass(frozen=True)
class SynthesisResult:
    waveform: Waveform
    attempts: int
    seed: int
    ser_label: EmotionLabel
    ser_score: float

    @property
    def provenance(self) -> dict:
        return {
            "attempts": self.attempts,
            "seed": self.seed,
            "ser_label": self.ser_label.value,
            "ser_score": round(self.ser_score, 6),
        }


def synthesize_with_retry(
    tts_client: TTSClient,
    ser_client: SERClient,
    text: str,
    emotion: EmotionLabel | str,
    reference: str,
    max_attempts: int = MAX_ATTEMPTS,
    seed: int = 0,
) -> SynthesisResult:
    """Synthesize until the SER label matches ``emotion`` or attempts run out."""
    if max_attempts < 1:
        raise ValidationError("max_attempts must be >= 1", field="max_attempts")
    emotion = EmotionLabel.parse(emotion)
    labels = []
    for attempt in range(1, max_attempts + 1):
        attempt_seed = seed if attempt == 1 else substream_seed(seed, "tts-retry", attempt)
        wav = tts_client.synthesize(text, reference, attempt_seed)
        label, score = ser_client.classify(wav)
        label = EmotionLabel.parse(label)
        labels.append(label.value)
        if label == emotion:
            return SynthesisResult(wav, attempt, attempt_seed, label, float(score))
        log.debug("attempt %d: SER heard %s, wanted %s", attempt, label.value, emotion.value)
    raise ConsistencyError(
        f"SER never agreed with {emotion.value!r} in {max_attempts} attempts (heard {labels})",
        attempts=max_attempts,
    )


def normalize_loudness(segments: Sequence[Waveform], silence_rms: float = SILENCE_RMS) -> list[Waveform]:
    """Scale every non-silent segment to the mean RMS of the non-silent inputs."""
    if not segments:
        return []
    if any(len(s) == 0 for s in segments):
        raise ValidationError("segments must be non-empty", field="segments")
    levels = [s.rms for s in segments]
    voiced = [r for r in levels if r >= silence_rms]
    if not voiced:
        raise NormalizationError("all segments are below the silence threshold")
    target = float(np.mean(voiced))
    return [s if r < silence_rms else s.scaled(target / r) for s, r in zip(segments, levels)]


def concatenate(
    segments: Sequence[Waveform],
    emotions: Sequence[EmotionLabel | str],
    ramp_ms: float = 0.0,
) -> tuple[Waveform, list[TimedSegment]]:
    """Join segments back to back; boundaries sit at cumulative durations."""
    if len(segments) != len(emotions):
        raise ValidationError("need one emotion per segment", field="emotions")
    if not segments:
        raise ValidationError("nothing to concatenate", field="segments")
    rates = {s.sample_rate for s in segments}
    if len(rates) != 1:
        raise FormatError(f"mixed sample rates {sorted(rates)}")
    sr = rates.pop()
    parts = []
    ramp = int(round(ramp_ms * sr / 1000.0))
    for s in segments:
        x = np.array(s.samples)
        if ramp and x.size >= 2 * ramp:
            fade = np.linspace(0.0, 1.0, ramp)
            x[:ramp] *= fade
            x[-ramp:] *= fade[::-1]
        parts.append(x)
    timeline = []
    pos = 0
    for s, emo in zip(segments, emotions):
        timeline.append(TimedSegment(pos / sr, (pos + len(s)) / sr, emo))
        pos += len(s)
    return Waveform(np.concatenate(parts), sr), timeline
