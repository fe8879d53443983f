"""Waveform value type and 16-bit PCM WAV persistence."""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError

DEFAULT_SAMPLE_RATE = 16000


@dataclass(frozen=True, eq=False)
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise FormatError(f"expected mono samples, got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise ValidationError("sample_rate must be positive", field="sample_rate")
        if not np.all(np.isfinite(samples)):
            raise ValidationError("samples must be finite", field="samples")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, Waveform):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(self.samples, other.samples)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def rms(self) -> float:
        if self.samples.size == 0:
            return 0.0
        return float(np.sqrt(np.mean(self.samples**2)))

    def slice_s(self, start_s: float, end_s: float) -> "Waveform":
        a = max(0, int(round(start_s * self.sample_rate)))
        b = min(self.samples.size, int(round(end_s * self.sample_rate)))
        return Waveform(self.samples[a:max(a, b)], self.sample_rate)

    def scaled(self, gain: float) -> "Waveform":
        return Waveform(self.samples * gain, self.sample_rate)

    @classmethod
    def silence(cls, duration_s: float, sample_rate: int = DEFAULT_SAMPLE_RATE) -> "Waveform":
        return cls(np.zeros(int(round(duration_s * sample_rate))), sample_rate)


def write_wav(path: str | Path, wav: Waveform) -> None:
    pcm = np.clip(np.round(wav.samples * 32767.0), -32768, 32767).astype("<i2")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(wav.sample_rate)
        fh.writeframes(pcm.tobytes())


def read_wav(path: str | Path) -> Waveform:
    with wave.open(str(path), "rb") as fh:
        if fh.getsampwidth() != 2:
            raise FormatError(f"{path}: only 16-bit PCM is supported")
        channels = fh.getnchannels()
        rate = fh.getframerate()
        data = np.frombuffer(fh.readframes(fh.getnframes()), dtype="<i2").astype(np.float64)
    if channels > 1:
        data = data.reshape(-1, channels).mean(axis=1)
    return Waveform(data / 32767.0, rate)
