"""Pluggable external-model client interfaces.

Every external model (text generator, TTS, SER, ASR, feature extractor,
emotion embedder, profile classifier) is reached through one of the small
protocols below.  Deterministic offline implementations live in
:mod:`emotranscap.fallback`.
"""

from __future__ import annotations

import importlib
import json
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Protocol, runtime_checkable

import numpy as np

from .errors import ClientError, ShapeError, ValidationError

if TYPE_CHECKING:
    from .audio import Waveform
    from .core import EmotionLabel, SpeakerProfile


@dataclass(frozen=True)
class CharTiming:
    char: str
    start_s: float
    end_s: float


@dataclass(frozen=True)
class Transcript:
    text: str
    char_timings: tuple[CharTiming, ...] | None = None


@dataclass(frozen=True)
class FeatureSequence:
    """T x D frame matrix sampled at ``frame_rate`` frames per second."""

    frames: np.ndarray
    frame_rate: float = 50.0

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float32)
        if frames.ndim != 2 or frames.shape[0] < 1:
            raise ShapeError(f"features must be T x D with T >= 1, got {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise ValidationError("features must be finite", field="frames")
        object.__setattr__(self, "frames", frames)

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def dim(self) -> int:
        return int(self.frames.shape[1])


@runtime_checkable
class TextGenerator(Protocol):
    def send(self, prompt: str, language: str, seed: int) -> list[str]: ...


@runtime_checkable
class TTSClient(Protocol):
    def synthesize(self, text: str, reference_key: str, seed: int) -> "Waveform": ...


@runtime_checkable
class SERClient(Protocol):
    def classify(self, wav: "Waveform") -> tuple["EmotionLabel", float]: ...


@runtime_checkable
class ASRClient(Protocol):
    def transcribe(self, wav: "Waveform") -> Transcript: ...


@runtime_checkable
class FeatureExtractor(Protocol):
    def extract(self, wav: "Waveform") -> FeatureSequence: ...


@runtime_checkable
class Embedder(Protocol):
    def embed(self, wav: "Waveform") -> np.ndarray: ...


@runtime_checkable
class ProfileClassifier(Protocol):
    def profile(self, wav: "Waveform") -> "SpeakerProfile": ...


@dataclass
class HttpTextGenerator:
    """JSON-over-HTTP text generator.

    POSTs ``{"prompt", "language", "seed"}`` to ``endpoint`` and accepts either
    ``{"lines": [...]}`` or ``{"text": "..."}`` (split on newlines) back.
    """

    endpoint: str
    timeout_s: float = 60.0
    headers: dict[str, str] = field(default_factory=dict)

    def send(self, prompt: str, language: str, seed: int) -> list[str]:
        body = json.dumps({"prompt": prompt, "language": language, "seed": seed}).encode("utf-8")
        req = urllib.request.Request(
            self.endpoint,
            data=body,
            headers={"Content-Type": "application/json", **self.headers},
            method="POST",
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, TimeoutError, OSError, json.JSONDecodeError) as exc:
            raise ClientError(f"text generation request to {self.endpoint} failed: {exc}") from exc
        if isinstance(payload, dict) and isinstance(payload.get("lines"), list):
            return [str(x) for x in payload["lines"]]
        if isinstance(payload, dict) and isinstance(payload.get("text"), str):
            return [ln for ln in payload["text"].splitlines() if ln.strip()]
        raise ClientError(f"unexpected response shape from {self.endpoint}")


def load_object(spec: str, **kwargs: Any) -> Any:
    """Instantiate ``"package.module:factory"`` with keyword arguments."""
    if ":" not in spec:
        raise ClientError(f"client spec {spec!r} must look like 'module:factory'")
    module_name, attr = spec.split(":", 1)
    try:
        factory = getattr(importlib.import_module(module_name), attr)
    except (ImportError, AttributeError) as exc:
        raise ClientError(f"cannot load client {spec!r}: {exc}") from exc
    return factory(**kwargs)
