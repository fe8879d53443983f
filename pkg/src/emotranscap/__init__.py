"""Emotion-transition speech dataset construction, recognition and captioning."""

from .core import (
    EMOTIONS,
    AttributeSequence,
    CaptionRecord,
    EmotionLabel,
    SegmentAttributes,
    SentenceRecord,
    SpeakerProfile,
    TimedSegment,
    TransitionPlan,
    UtteranceManifest,
    format_timestamp,
    parse_timestamp,
)
from .errors import EmoTransError, ValidationError

__version__ = "0.1.0"

__all__ = [
    "EMOTIONS",
    "AttributeSequence",
    "CaptionRecord",
    "EmoTransError",
    "EmotionLabel",
    "SegmentAttributes",
    "SentenceRecord",
    "SpeakerProfile",
    "TimedSegment",
    "TransitionPlan",
    "UtteranceManifest",
    "ValidationError",
    "__version__",
    "format_timestamp",
    "parse_timestamp",
]
