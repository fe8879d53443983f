"""Shared domain model: emotions, plans, timed segments and utterance records."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Sequence

from .errors import RangeError, ValidationError

# Tolerance used when checking that timings tile a timeline.
TIME_EPS = 1e-6


class EmotionLabel(str, Enum):
    ANGRY = "angry"
    HAPPY = "happy"
    SAD = "sad"
    NEUTRAL = "neutral"
    SURPRISED = "surprised"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, value: "str | EmotionLabel") -> "EmotionLabel":
        if isinstance(value, EmotionLabel):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValidationError(f"unknown emotion {value!r}", field="emotion") from None

    @property
    def display(self) -> str:
        return _DISPLAY[self]

    @property
    def index(self) -> int:
        return EMOTIONS.index(self)


_DISPLAY = {
    EmotionLabel.ANGRY: "Angry",
    EmotionLabel.HAPPY: "Happy",
    EmotionLabel.SAD: "Sadness",
    EmotionLabel.NEUTRAL: "Neutral",
    EmotionLabel.SURPRISED: "Surprised",
}

# Class order used for frame labels (alphabetical, matches plan ordering).
EMOTIONS: tuple[EmotionLabel, ...] = tuple(sorted(EmotionLabel, key=lambda e: e.value))
LANGUAGES = ("en", "zh")


@dataclass(frozen=True)
class TransitionPlan:
    """Ordered emotion sequence of a discourse; adjacent entries differ."""

    emotions: tuple[EmotionLabel, ...]

    def __post_init__(self):
        emotions = tuple(EmotionLabel.parse(e) for e in self.emotions)
        object.__setattr__(self, "emotions", emotions)
        if not emotions:
            raise ValidationError("plan must contain at least one emotion", field="plan")
        for i, (a, b) in enumerate(zip(emotions, emotions[1:])):
            if a == b:
                raise ValidationError(
                    f"adjacent duplicate {a.value!r} at positions {i} and {i + 1}", field="plan"
                )

    @classmethod
    def of(cls, *emotions: "str | EmotionLabel") -> "TransitionPlan":
        return cls(tuple(emotions))

    @property
    def transition_count(self) -> int:
        return len(self.emotions) - 1

    def __len__(self) -> int:
        return len(self.emotions)

    def __iter__(self):
        return iter(self.emotions)

    def __str__(self) -> str:
        return "->".join(e.value for e in self.emotions)

    def to_json(self) -> list[str]:
        return [e.value for e in self.emotions]


def collapse_runs(emotions: Iterable["str | EmotionLabel"]) -> tuple[EmotionLabel, ...]:
    out: list[EmotionLabel] = []
    for e in emotions:
        e = EmotionLabel.parse(e)
        if not out or out[-1] != e:
            out.append(e)
    return tuple(out)


@dataclass(frozen=True)
class TimedSegment:
    start_s: float
    end_s: float
    emotion: EmotionLabel

    def __post_init__(self):
        object.__setattr__(self, "emotion", EmotionLabel.parse(self.emotion))
        object.__setattr__(self, "start_s", float(self.start_s))
        object.__setattr__(self, "end_s", float(self.end_s))
        if not (math.isfinite(self.start_s) and math.isfinite(self.end_s)):
            raise ValidationError("segment times must be finite", field="segment")
        if self.start_s < 0:
            raise ValidationError(f"start_s {self.start_s} < 0", field="start_s")
        if self.end_s <= self.start_s:
            raise ValidationError(
                f"end_s {self.end_s} must exceed start_s {self.start_s}", field="end_s"
            )

    @property
    def duration(self) -> float:
        return self.end_s - self.start_s

    def to_json(self) -> dict[str, Any]:
        return {"start_s": self.start_s, "end_s": self.end_s, "emotion": self.emotion.value}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "TimedSegment":
        return cls(obj["start_s"], obj["end_s"], obj["emotion"])


def validate_segment_list(segments: Sequence[TimedSegment]) -> None:
    """Sorted, non-overlapping, adjacent emotions distinct."""
    for i, (a, b) in enumerate(zip(segments, segments[1:])):
        if b.start_s < a.end_s - TIME_EPS:
            raise ValidationError(f"segments {i} and {i + 1} overlap or are unsorted", "segments")
        if a.emotion == b.emotion:
            raise ValidationError(
                f"segments {i} and {i + 1} share emotion {a.emotion.value!r}", "segments"
            )


def segments_plan(segments: Sequence[TimedSegment]) -> TransitionPlan:
    return TransitionPlan(collapse_runs(s.emotion for s in segments))


def format_timestamp(t: float) -> str:
    """Render seconds as zero-padded ``MM:SS`` (floored to the second)."""
    if not math.isfinite(t) or t < 0 or t >= 3600:
        raise RangeError(f"timestamp {t!r} outside [0, 3600)", field="t")
    # small epsilon keeps 4.9999999997 (accumulated float error) at 5
    whole = min(int(math.floor(t + 1e-9)), 3599)
    return f"{whole // 60:02d}:{whole % 60:02d}"


_TS_RE = re.compile(r"^(\d{2}):(\d{2})$")


def parse_timestamp(text: str) -> int:
    m = _TS_RE.match(text.strip())
    if not m or int(m.group(2)) >= 60:
        raise ValidationError(f"malformed timestamp {text!r}", field="timestamp")
    return int(m.group(1)) * 60 + int(m.group(2))


@dataclass(frozen=True)
class SentenceRecord:
    text: str
    emotion: EmotionLabel
    start_s: float
    end_s: float
    audio_ref: str
    extra: dict[str, Any] = field(default_factory=dict, compare=True)

    def __post_init__(self):
        object.__setattr__(self, "emotion", EmotionLabel.parse(self.emotion))
        if not self.text or not self.text.strip():
            raise ValidationError("sentence text must be non-empty", field="sentences.text")
        if self.start_s < 0 or self.end_s <= self.start_s:
            raise ValidationError(
                f"bad timing ({self.start_s}, {self.end_s})", field="sentences.start_s"
            )


@dataclass(frozen=True)
class CaptionRecord:
    v_i: str
    v_d: str
    encoded_plan: TransitionPlan
    ssml: str | None = None


@dataclass(frozen=True)
class SpeakerProfile:
    gender: str = "unknown"
    age_bucket: str | None = None

    GENDERS = ("male", "female", "unknown")

    def __post_init__(self):
        if self.gender not in self.GENDERS:
            raise ValidationError(f"gender {self.gender!r} not in {self.GENDERS}", "gender")

    @property
    def is_empty(self) -> bool:
        return self.gender == "unknown" and self.age_bucket is None


@dataclass(frozen=True)
class SegmentAttributes:
    start_s: float
    end_s: float
    emotion: EmotionLabel
    transcript: str
    pitch_hz: float
    pitch_cat: str
    energy_db: float
    energy_cat: str
    speed_ups: float
    speed_cat: str

    def __post_init__(self):
        object.__setattr__(self, "emotion", EmotionLabel.parse(self.emotion))


@dataclass(frozen=True)
class AttributeSequence:
    profile: SpeakerProfile
    segments: tuple[SegmentAttributes, ...]

    @property
    def plan(self) -> TransitionPlan:
        return TransitionPlan(collapse_runs(s.emotion for s in self.segments))

    def __len__(self) -> int:
        return len(self.segments)


@dataclass(frozen=True)
class UtteranceManifest:
    id: str
    language: str
    speaker_id: str
    plan: TransitionPlan
    sentences: tuple[SentenceRecord, ...]
    discourse_audio_ref: str
    seed: int
    captions: CaptionRecord | None = None
    attributes: AttributeSequence | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        self.validate()

    def validate(self) -> None:
        if self.language not in LANGUAGES:
            raise ValidationError(f"unsupported language {self.language!r}", field="language")
        if not self.sentences:
            raise ValidationError("manifest needs at least one sentence", field="sentences")
        collapsed = collapse_runs(s.emotion for s in self.sentences)
        if collapsed != self.plan.emotions:
            raise ValidationError(
                f"sentence emotions {[e.value for e in collapsed]} do not match plan "
                f"{self.plan.to_json()}",
                field="plan",
            )
        if abs(self.sentences[0].start_s) > TIME_EPS:
            raise ValidationError("first sentence must start at 0", field="sentences")
        for a, b in zip(self.sentences, self.sentences[1:]):
            if abs(b.start_s - a.end_s) > TIME_EPS:
                raise ValidationError(
                    f"sentence timings do not tile: {a.end_s} -> {b.start_s}", field="sentences"
                )
        if self.captions is not None and not isinstance(self.captions.encoded_plan, TransitionPlan):
            raise ValidationError("encoded_plan must be a TransitionPlan", field="captions")

    @property
    def duration_s(self) -> float:
        return self.sentences[-1].end_s

    @property
    def transition_count(self) -> int:
        return self.plan.transition_count

    @property
    def text(self) -> str:
        sep = "" if self.language == "zh" else " "
        return sep.join(s.text for s in self.sentences)

    def true_segments(self) -> list[TimedSegment]:
        """Sentence timings merged into emotion segments."""
        segs: list[TimedSegment] = []
        for s in self.sentences:
            if segs and segs[-1].emotion == s.emotion:
                segs[-1] = TimedSegment(segs[-1].start_s, s.end_s, s.emotion)
            else:
                segs.append(TimedSegment(s.start_s, s.end_s, s.emotion))
        return segs
