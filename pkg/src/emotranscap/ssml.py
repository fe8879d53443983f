"""Speech-markup emitter and parser for instructional captions (dialect ``emotranscap-1``)."""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Sequence

from .core import AttributeSequence, EmotionLabel, SpeakerProfile, TransitionPlan, collapse_runs
from .errors import CaptionParseError

DIALECT = "emotranscap-1"
_XML_LANG = "{http://www.w3.org/XML/1998/namespace}lang"
_RATE = {"slow": "slow", "medium": "medium", "fast": "fast"}


@dataclass(frozen=True)
class SsmlSegment:
    index: int
    start_s: float
    end_s: float
    emotion: EmotionLabel
    pitch: str
    energy: str
    rate: str
    text: str = ""


@dataclass(frozen=True)
class SsmlDocument:
    language: str
    profile: SpeakerProfile
    segments: tuple[SsmlSegment, ...]

    @property
    def plan(self) -> TransitionPlan:
        return TransitionPlan(collapse_runs(s.emotion for s in self.segments))


def emit_ssml(attrs: AttributeSequence, language: str = "en", lines: Sequence[str] | None = None) -> str:
    """One ``<segment>`` per attribute segment; profile attributes only when known."""
    if lines is not None and len(lines) != len(attrs):
        raise CaptionParseError(f"{len(lines)} caption lines for {len(attrs)} segments")
    root = ET.Element("speak", {"version": DIALECT, _XML_LANG: language})
    prof = attrs.profile
    for i, s in enumerate(attrs.segments, 1):
        el = ET.SubElement(
            root,
            "segment",
            {
                "index": str(i),
                "start": f"{s.start_s:.3f}",
                "end": f"{s.end_s:.3f}",
                "emotion": s.emotion.value,
                "pitch": s.pitch_cat,
                "energy": s.energy_cat,
                "rate": _RATE.get(s.speed_cat, s.speed_cat),
            },
        )
        if prof.gender != "unknown":
            el.set("gender", prof.gender)
        if prof.age_bucket:
            el.set("age", prof.age_bucket)
        if lines is not None:
            el.text = lines[i - 1]
    ET.indent(root, space="  ")
    return ET.tostring(root, encoding="unicode")


def parse_ssml(text: str) -> SsmlDocument:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise CaptionParseError(f"malformed markup: {exc}") from exc
    if root.tag != "speak":
        raise CaptionParseError(f"root element is <{root.tag}>, expected <speak>")
    if root.get("version") != DIALECT:
        raise CaptionParseError(f"unsupported dialect {root.get('version')!r}")
    segs = []
    gender, age = "unknown", None
    for el in root.findall("segment"):
        try:
            segs.append(
                SsmlSegment(
                    index=int(el.get("index")),
                    start_s=float(el.get("start")),
                    end_s=float(el.get("end")),
                    emotion=EmotionLabel.parse(el.get("emotion")),
                    pitch=el.get("pitch", ""),
                    energy=el.get("energy", ""),
                    rate=el.get("rate", ""),
                    text=(el.text or "").strip(),
                )
            )
        except (TypeError, ValueError) as exc:
            raise CaptionParseError(f"bad <segment> attributes: {exc}") from exc
        gender = el.get("gender", gender)
        age = el.get("age", age)
    if not segs:
        raise CaptionParseError("no <segment> elements")
    segs.sort(key=lambda s: s.index)
    try:
        profile = SpeakerProfile(gender, age)
    except ValueError as exc:
        raise CaptionParseError(str(exc)) from exc
    return SsmlDocument(root.get(_XML_LANG, "en"), profile, tuple(segs))
