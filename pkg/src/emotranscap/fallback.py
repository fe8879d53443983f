"""Deterministic offline stand-ins for the external models.

These let the whole pipeline run without network access or pretrained
weights.  The tone synthesizer renders each emotion with its own pitch
register, harmonic brightness, loudness and tempo, so the downstream
SER / feature / embedding fallbacks have a real acoustic signal to work on.
"""

from __future__ import annotations

import re
import zlib
from dataclasses import dataclass

import numpy as np

from .attributes import count_text_units, estimate_pitch
from .audio import DEFAULT_SAMPLE_RATE, Waveform
from .clients import CharTiming, FeatureSequence, Transcript
from .core import EmotionLabel, SpeakerProfile
from .errors import ClientError, UnvoicedSignalError
from .preprocess import aggregate_segments, energy_vad


@dataclass(frozen=True)
class VoiceStyle:
    f0_hz: float
    tempo: float
    amplitude: float
    brightness: float


EMOTION_STYLES: dict[EmotionLabel, VoiceStyle] = {
    EmotionLabel.SAD: VoiceStyle(115.0, 0.75, 0.12, 0.35),
    EmotionLabel.NEUTRAL: VoiceStyle(150.0, 1.00, 0.20, 0.50),
    EmotionLabel.HAPPY: VoiceStyle(195.0, 1.15, 0.28, 0.60),
    EmotionLabel.ANGRY: VoiceStyle(245.0, 1.30, 0.42, 0.75),
    EmotionLabel.SURPRISED: VoiceStyle(310.0, 1.10, 0.33, 0.65),
}
BASE_UNITS_PER_S = {"en": 3.0, "zh": 4.5}
_REF_RE = re.compile(r"^fallback://(?P<speaker>[^/]+)/(?P<emotion>[a-z]+)$")
_CJK_RE = re.compile(r"[\u4e00-\u9fff]")


def fallback_reference_key(speaker_id: str, emotion: EmotionLabel | str) -> str:
    return f"fallback://{speaker_id}/{EmotionLabel.parse(emotion).value}"


def _speaker_offset(speaker_id: str) -> float:
    """Stable per-speaker pitch factor in [0.95, 1.05]."""
    h = zlib.crc32(speaker_id.encode("utf-8")) / 0xFFFFFFFF
    return 0.95 + 0.10 * h


class ToneTTS:
    """Harmonic-tone "speech" whose acoustics encode the target emotion.

    With probability ``misrender_rate`` (decided by the call seed) it renders
    a different emotion, which exercises the SER consistency gate.
    """

    def __init__(
        self,
        sample_rate: int = DEFAULT_SAMPLE_RATE,
        misrender_rate: float = 0.15,
        pad_s: float = 0.2,
    ):
        self.sample_rate = sample_rate
        self.misrender_rate = misrender_rate
        self.pad_s = pad_s

    def synthesize(self, text: str, reference_key: str, seed: int) -> Waveform:
        m = _REF_RE.match(reference_key)
        if not m:
            raise ClientError(f"tone TTS cannot interpret reference {reference_key!r}")
        speaker = m.group("speaker")
        emotion = EmotionLabel.parse(m.group("emotion"))
        rng = np.random.default_rng(seed)
        if rng.random() < self.misrender_rate:
            others = [e for e in EmotionLabel if e != emotion]
            emotion = others[rng.integers(len(others))]
        language = "zh" if _CJK_RE.search(text) else "en"
        return self.render(text, emotion, speaker, language, rng)

    def render(
        self,
        text: str,
        emotion: EmotionLabel,
        speaker: str,
        language: str,
        rng: np.random.Generator,
    ) -> Waveform:
        sr = self.sample_rate
        style = EMOTION_STYLES[emotion]
        units = max(1, count_text_units(text, language))
        dur = max(0.6, units / (BASE_UNITS_PER_S[language] * style.tempo))
        n = int(round(dur * sr))
        t = np.arange(n) / sr

        f0 = style.f0_hz * _speaker_offset(speaker)
        contour = f0 * (1 + 0.04 * np.sin(2 * np.pi * 0.6 * t + rng.uniform(0, 2 * np.pi)))
        contour *= 1 - 0.05 * t / dur
        phase = 2 * np.pi * np.cumsum(contour) / sr
        voice = np.zeros(n)
        k = 1
        while k * f0 < 3800:
            voice += style.brightness ** (k - 1) * np.sin(k * phase)
            k += 1
        voice /= np.sqrt(np.mean(voice**2)) + 1e-12

        syllables = units * (1.5 if language == "en" else 1.0) / dur
        env = 0.6 + 0.4 * np.cos(2 * np.pi * syllables * t + rng.uniform(0, 2 * np.pi))
        ramp = min(n // 2, int(0.02 * sr))
        if ramp:
            fade = np.linspace(0, 1, ramp)
            env[:ramp] *= fade
            env[-ramp:] *= fade[::-1]
        speech = style.amplitude * env * voice + 0.02 * style.amplitude * rng.standard_normal(n)

        pad = int(round(self.pad_s * sr))
        out = np.concatenate(
            [5e-5 * rng.standard_normal(pad), speech, 5e-5 * rng.standard_normal(pad)]
        )
        return Waveform(np.clip(out, -1, 1), sr)


class PitchSER:
    """Emotion from mean F0, nearest register on a log scale."""

    def classify(self, wav: Waveform) -> tuple[EmotionLabel, float]:
        try:
            f0 = estimate_pitch(wav)
        except UnvoicedSignalError:
            return EmotionLabel.NEUTRAL, 0.0
        dist = {e: abs(np.log(f0 / s.f0_hz)) for e, s in EMOTION_STYLES.items()}
        best = min(dist, key=dist.get)
        return best, float(np.exp(-((dist[best] / 0.12) ** 2)))


def _log_spectra(wav: Waveform, frame_rate: float, win: int = 512) -> np.ndarray:
    hop = wav.sample_rate / frame_rate
    count = max(1, int(len(wav) // hop))
    padded = np.concatenate([np.zeros(win // 2), wav.samples, np.zeros(win)])
    centers = ((np.arange(count) + 0.5) * hop).astype(int) + win // 2
    idx = centers[:, None] + np.arange(-win // 2, win // 2)[None, :]
    frames = padded[idx] * np.hanning(win)[None, :]
    power = np.abs(np.fft.rfft(frames, axis=1)) ** 2
    return np.log10(power + 1e-10)


class SpectralFeatureExtractor:
    """Per-frame log spectra, z-scored per frame and randomly projected to ``dim``."""

    def __init__(self, dim: int = 768, frame_rate: float = 50.0, seed: int = 0):
        self.dim = dim
        self.frame_rate = frame_rate
        self._proj = np.random.default_rng(seed).standard_normal((257, dim)) / np.sqrt(257)

    def extract(self, wav: Waveform) -> FeatureSequence:
        spec = _log_spectra(wav, self.frame_rate)
        spec = (spec - spec.mean(axis=1, keepdims=True)) / (spec.std(axis=1, keepdims=True) + 1e-6)
        return FeatureSequence(spec @ self._proj, self.frame_rate)


class SpectralEmbedder:
    """Utterance embedding: mean shape-normalized log spectrum of loud frames."""

    def __init__(self, frame_rate: float = 100.0, level_db: float = -50.0):
        self.frame_rate = frame_rate
        self.level_db = level_db

    def embed(self, wav: Waveform) -> np.ndarray:
        spec = _log_spectra(wav, self.frame_rate)
        level = 10 * np.max(spec, axis=1)
        keep = level > np.max(level) + self.level_db
        spec = spec[keep] if keep.any() else spec
        spec = spec - spec.mean(axis=1, keepdims=True)
        v = spec.mean(axis=0)
        return v / (np.linalg.norm(v) + 1e-12)


class AlignerASR:
    """Known-transcript aligner: spreads characters uniformly over speech regions.

    Stands in for an ASR engine with character timestamps when the
    transcript is already known (synthetic data, evaluation references).
    """

    def __init__(self, text: str, frame_ms: int = 10, window_frames: int = 10, trigger_ratio: float = 0.9):
        self.text = text
        self.frame_ms = frame_ms
        self.window_frames = window_frames
        self.trigger_ratio = trigger_ratio

    def transcribe(self, wav: Waveform) -> Transcript:
        spans = aggregate_segments(
            energy_vad(wav, self.frame_ms), self.window_frames, self.trigger_ratio
        )
        chars = [c for c in self.text if c.isalnum()]
        total = sum(b - a for a, b in spans)
        if not spans or not chars or total <= 0:
            return Transcript("", ())
        step = total / len(chars)
        timings = tuple(
            CharTiming(
                c,
                _speech_time(spans, i * step, later=True),
                _speech_time(spans, (i + 1) * step, later=False),
            )
            for i, c in enumerate(chars)
        )
        return Transcript(self.text, timings)


def _speech_time(spans: list[tuple[float, float]], u: float, later: bool) -> float:
    """Wall-clock time of speech-time ``u``; junctions go to the later span if asked."""
    acc = 0.0
    for j, (a, b) in enumerate(spans):
        length = b - a
        last = j == len(spans) - 1
        if u < acc + length - 1e-12 or (not later and u <= acc + length + 1e-12) or last:
            return min(b, a + max(0.0, u - acc))
        acc += length
    return spans[-1][1]


_GENDERS = ("female", "male")
_AGES = ("young", "middle-aged", "elderly")


def fallback_speaker_profile(speaker_id: str) -> SpeakerProfile:
    """Stable made-up profile for a synthetic speaker id."""
    h = zlib.crc32(("profile:" + speaker_id).encode("utf-8"))
    return SpeakerProfile(_GENDERS[h % 2], _AGES[(h // 2) % 3])


class FixedProfileClassifier:
    def __init__(self, profile: SpeakerProfile):
        self._profile = profile

    def profile(self, wav: Waveform) -> SpeakerProfile:
        return self._profile
