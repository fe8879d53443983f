"""Caption prompts, validators, regeneration loop, template backend and plan parsing."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Sequence

from .clients import TextGenerator
from .core import (
    EmotionLabel,
    SegmentAttributes,
    SpeakerProfile,
    AttributeSequence,
    TransitionPlan,
    collapse_runs,
    format_timestamp,
    parse_timestamp,
)
from .errors import (
    CaptionParseError,
    ClientError,
    CompositionError,
    SpecError,
    ValidationError,
)
from .rng import substream_seed

log = logging.getLogger(__name__)

VERSIONS = ("V_I", "V_D")
MAX_ATTEMPTS = 3
LEAK_CHARS = {"en": 8, "zh": 4}
GLOBAL_HEADER = "[Global Description]"
PARTIAL_HEADER = "[Partial Description]"
FORBIDDEN_SYMBOLS = ("*", "#")

_CJK = "\u3400-\u4dbf\u4e00-\u9fff\uf900-\ufaff"
_CJK_RE = re.compile(f"[{_CJK}]")
PART_RE = re.compile(
    r"^\s*Part\s*(\d+)\s*\(\s*(\d{2}:\d{2})\s*[~–—-]\s*(\d{2}:\d{2})\s*\)\s*[:：]?\s*(.*)$"
)
_NUMBERING_RE = re.compile(
    r"^\s*(?:\(?\d+[.)、:]|\d+\s+-|[-•]\s|(?:Part|Segment|Caption)\s*\d+|第.{1,3}[段句])",
    re.IGNORECASE,
)

# Emotion vocabulary.  The first entry per language is what the template
# backend writes; the rest is used for best-effort parsing of free text.
EMOTION_WORDS: dict[str, dict[EmotionLabel, tuple[str, ...]]] = {
    "en": {
        EmotionLabel.ANGRY: ("angry", "anger", "furious", "irritated", "annoyed", "frustrated", "indignant"),
        EmotionLabel.HAPPY: ("happy", "happiness", "joy", "joyful", "cheerful", "delighted", "glad", "elated"),
        EmotionLabel.SAD: ("sad", "sadness", "sorrow", "sorrowful", "melancholy", "grief", "gloomy", "mournful"),
        EmotionLabel.NEUTRAL: ("neutral", "calm", "composed", "even-toned", "matter-of-fact", "level"),
        EmotionLabel.SURPRISED: ("surprised", "surprise", "astonished", "amazed", "startled", "stunned"),
    },
    "zh": {
        EmotionLabel.ANGRY: ("愤怒", "生气", "恼火", "气愤"),
        EmotionLabel.HAPPY: ("喜悦", "高兴", "开心", "愉快", "欢快"),
        EmotionLabel.SAD: ("悲伤", "难过", "伤心", "忧郁", "低落"),
        EmotionLabel.NEUTRAL: ("平静", "中性", "平淡", "冷静"),
        EmotionLabel.SURPRISED: ("惊讶", "吃惊", "震惊", "意外"),
    },
}

PROFILE_TERMS = {
    "en": (
        "male", "female", "man", "woman", "men", "women", "boy", "girl", "gentleman", "lady",
        "young", "elderly", "middle-aged", "old", "older", "child", "teen", "teenage",
        "teenager", "adult", "senior", "aged",
    ),
    "zh": ("男性", "女性", "男士", "女士", "男孩", "女孩", "年轻", "中年", "老年", "青年", "少年", "儿童", "老人"),
}

_LEVEL_WORDS = {
    "en": {
        "pitch": {"low": "low", "medium": "moderate", "high": "high"},
        "energy": {"low": "soft", "medium": "steady", "high": "strong"},
        "speed": {"slow": "slow", "medium": "measured", "fast": "quick"},
    },
    "zh": {
        "pitch": {"low": "偏低", "medium": "适中", "high": "偏高"},
        "energy": {"low": "较弱", "medium": "平稳", "high": "饱满"},
        "speed": {"slow": "缓慢", "medium": "适中", "fast": "轻快"},
    },
}


def _emotion_word(e: EmotionLabel, language: str) -> str:
    return EMOTION_WORDS[language][e][0]


# ---- prompts -------------------------------------------------------------------


@dataclass(frozen=True)
class PromptSpec:
    version: str
    segment_count: int
    segment_descriptions: str
    language: str = "en"

    def __post_init__(self):
        if self.version not in VERSIONS:
            raise SpecError(f"version must be one of {VERSIONS}", field="version")
        if self.segment_count < 1:
            raise SpecError("segment_count must be >= 1", field="segment_count")


def describe_segments(attrs: AttributeSequence, version: str) -> str:
    """Render the attribute block fed to the caption prompt."""
    prof = attrs.profile
    lines = []
    for i, s in enumerate(attrs.segments, 1):
        fields = [
            f"emotion={s.emotion.value}",
            f"pitch={s.pitch_cat} ({s.pitch_hz:.1f} Hz)",
            f"energy={s.energy_cat} ({s.energy_db:.1f} dBFS)",
            f"speed={s.speed_cat} ({s.speed_ups:.2f} units/s)",
            f"gender={prof.gender}",
            f"age={prof.age_bucket or 'unknown'}",
        ]
        if version == "V_D":
            fields += [
                f"start={format_timestamp(s.start_s)}",
                f"end={format_timestamp(s.end_s)}",
                f"transcript={s.transcript}",
            ]
        lines.append(f"Segment {i}: " + "; ".join(fields))
    return "\n".join(lines)


def prompt_spec(version: str, attrs: AttributeSequence, language: str = "en") -> PromptSpec:
    return PromptSpec(version, len(attrs), describe_segments(attrs, version), language)


_VI_PROMPT = """\
Task: write speaking-style captions for a recording of {segment_num} consecutive segment(s) from one speaker.
Each segment below lists its emotion, pitch, energy, speaking speed and the speaker profile.

Rules:
1. Output exactly {segment_num} line(s), one caption per segment, in segment order, with no numbering.
2. Never quote or reuse wording from the transcript.
3. Describe speed, pitch, energy and emotion in plain, concise words; name each segment's emotion.
4. Gender and age may appear in the first line only.
5. Link consecutive lines with transition words and keep an objective tone.
6. Do not use the symbols * or #.
Write in {language_name}.

Segments:
{segment_descriptions}
"""

_VD_PROMPT = """\
Task: describe a recording split into {segment_num} segment(s). Each segment lists pitch, speed, energy, emotion, age, gender, transcript and start/end times.
Produce two sections, each introduced by its header on its own line.

{global_header}
One paragraph (no line breaks, no symbols) covering the overall emotional course, tone, speed and pitch movement, with gender and age worked in. Use the transcript for context only; do not copy it. With a single segment, do not describe any emotional change.

{partial_header}
One entry per segment, each starting with "Part X (MM:SS ~ MM:SS):" using that segment's start and end time, followed by short, objective full sentences about its pitch, speed, energy and emotion. Do not mention the speaker and do not quote the transcript.
Write in {language_name}.

Segments:
{segment_data}
"""

_LANGUAGE_NAMES = {"en": "English", "zh": "Chinese"}


def build_prompt(spec: PromptSpec, attrs: AttributeSequence) -> str:
    if spec.segment_count != len(attrs):
        raise SpecError(
            f"spec declares {spec.segment_count} segments but attributes have {len(attrs)}",
            field="segment_count",
        )
    name = _LANGUAGE_NAMES.get(spec.language, spec.language)
    if spec.version == "V_I":
        return _VI_PROMPT.format(
            segment_num=spec.segment_count,
            language_name=name,
            segment_descriptions=spec.segment_descriptions,
        )
    return _VD_PROMPT.format(
        segment_num=spec.segment_count,
        language_name=name,
        global_header=GLOBAL_HEADER,
        partial_header=PARTIAL_HEADER,
        segment_data=spec.segment_descriptions,
    )


# ---- validation ------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    rule_id: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def rule_ids(self) -> list[str]:
        return [v.rule_id for v in self.violations]

    def feedback(self) -> str:
        return "\n".join(f"- {v.rule_id}: {v.message}" for v in self.violations)


def _lines(text: str) -> list[str]:
    return [ln.strip() for ln in text.splitlines() if ln.strip()]


def _norm_words(text: str) -> list[str]:
    return re.findall(r"[a-z0-9']+", text.lower())


def transcript_leak(caption: str, transcript: str, language: str = "en") -> str | None:
    """Longest verbatim overlap reaching the leak threshold, else None.

    English compares whole-word runs (case-insensitive) so incidental
    character overlaps such as "ing the " do not count; Chinese compares
    runs of CJK characters.
    """
    if not transcript:
        return None
    if language == "zh":
        src = "".join(_CJK_RE.findall(transcript))
        cap = "".join(_CJK_RE.findall(caption))
        n = LEAK_CHARS["zh"]
        for i in range(len(src) - n + 1):
            if src[i : i + n] in cap:
                return src[i : i + n]
        return None
    cw, tw = _norm_words(caption), _norm_words(transcript)
    best = ""
    # longest common contiguous word run, dynamic programming over word pairs
    prev = [0] * (len(tw) + 1)
    for i in range(1, len(cw) + 1):
        cur = [0] * (len(tw) + 1)
        for j in range(1, len(tw) + 1):
            if cw[i - 1] == tw[j - 1]:
                cur[j] = prev[j - 1] + 1
                run = " ".join(cw[i - cur[j] : i])
                if len(run) > len(best):
                    best = run
        prev = cur
    return best if len(best) >= LEAK_CHARS["en"] else None


def _profile_term(line: str, language: str) -> str | None:
    if language == "zh":
        return next((t for t in PROFILE_TERMS["zh"] if t in line), None)
    words = set(re.findall(r"[a-z]+(?:-[a-z]+)*", line.lower()))
    return next((t for t in PROFILE_TERMS["en"] if t in words), None)


def find_emotions(line: str, language: str = "en") -> list[EmotionLabel]:
    """Emotions mentioned in ``line`` in order of first appearance."""
    hits = []
    low = line.lower()
    for emo, words in EMOTION_WORDS[language].items():
        for w in words:
            if language == "zh":
                pos = low.find(w)
            else:
                m = re.search(rf"(?<![a-z-]){re.escape(w)}(?![a-z-])", low)
                pos = m.start() if m else -1
            if pos >= 0:
                hits.append((pos, emo))
                break
    return [e for _, e in sorted(hits, key=lambda h: h[0])]


def _leak_violations(text: str, transcripts: Sequence[str], language: str) -> list[Violation]:
    out = []
    for i, t in enumerate(transcripts or ()):
        span = transcript_leak(text, t, language)
        if span:
            out.append(Violation("transcript_leak", f"reuses transcript {i + 1} text {span!r}"))
    return out


def _symbol_violations(text: str, where: str) -> list[Violation]:
    return [
        Violation("forbidden_symbol", f"{where} contains {sym!r}")
        for sym in FORBIDDEN_SYMBOLS
        if sym in text
    ]


def validate_vi(
    caption: str,
    segment_count: int,
    transcripts: Sequence[str] = (),
    language: str = "en",
    emotions: Sequence[EmotionLabel | str] | None = None,
) -> ValidationReport:
    """Structure, quoting, symbol and profile-placement checks for instructional captions.

    When ``emotions`` is given, each line must name its segment's emotion
    (the label-omission check).
    """
    v: list[Violation] = []
    lines = _lines(caption)
    if len(lines) != segment_count:
        v.append(Violation("line_count", f"expected {segment_count} line(s), got {len(lines)}"))
    for i, ln in enumerate(lines, 1):
        if _NUMBERING_RE.match(ln):
            v.append(Violation("numbering", f"line {i} starts with a numbering prefix"))
    v += _leak_violations(caption, transcripts, language)
    v += _symbol_violations(caption, "caption")
    for i, ln in enumerate(lines[1:], 2):
        term = _profile_term(ln, language)
        if term:
            v.append(Violation("profile_position", f"line {i} mentions {term!r}; only line 1 may"))
    if emotions is not None and len(lines) == len(emotions):
        for i, (ln, e) in enumerate(zip(lines, emotions), 1):
            e = EmotionLabel.parse(e)
            if e not in find_emotions(ln, language):
                v.append(Violation("label_omission", f"line {i} does not convey {e.value}"))
    return ValidationReport(tuple(v))


@dataclass(frozen=True)
class PartEntry:
    index: int
    start: int
    end: int
    text: str


def split_vd(caption: str) -> tuple[str | None, list[PartEntry] | None, list[str]]:
    """(global paragraph, part entries, stray partial lines); None where a header is missing."""
    g = caption.find(GLOBAL_HEADER)
    p = caption.find(PARTIAL_HEADER)
    if g < 0 or p < 0 or p < g:
        return None, None, []
    global_text = caption[g + len(GLOBAL_HEADER) : p].strip()
    parts: list[PartEntry] = []
    stray: list[str] = []
    for ln in _lines(caption[p + len(PARTIAL_HEADER) :]):
        m = PART_RE.match(ln)
        if m:
            try:
                start, end = parse_timestamp(m.group(2)), parse_timestamp(m.group(3))
            except ValidationError:
                stray.append(ln)
                continue
            parts.append(PartEntry(int(m.group(1)), start, end, m.group(4).strip()))
        elif parts:
            last = parts[-1]
            parts[-1] = PartEntry(last.index, last.start, last.end, (last.text + " " + ln).strip())
        else:
            stray.append(ln)
    return global_text, parts, stray


def validate_vd(
    caption: str,
    segment_count: int | None = None,
    transcripts: Sequence[str] = (),
    language: str = "en",
) -> ValidationReport:
    v: list[Violation] = []
    for header in (GLOBAL_HEADER, PARTIAL_HEADER):
        if header not in caption:
            v.append(Violation("missing_header", f"missing {header}"))
    global_text, parts, stray = split_vd(caption)
    if global_text is None:
        if not v:
            v.append(Violation("header_order", f"{GLOBAL_HEADER} must precede {PARTIAL_HEADER}"))
        return ValidationReport(tuple(v))
    if not global_text:
        v.append(Violation("global_empty", "global description is empty"))
    elif "\n" in global_text:
        v.append(Violation("global_linebreak", "global description spans several lines"))
    v += _symbol_violations(global_text, "global description")
    if stray:
        v.append(Violation("part_format", f"text before the first Part header: {stray[0][:40]!r}"))
    if not parts:
        v.append(Violation("part_format", "no 'Part X (MM:SS ~ MM:SS)' entries"))
    for pos, part in enumerate(parts, 1):
        if part.index != pos:
            v.append(Violation("part_numbering", f"entry {pos} is labelled Part {part.index}"))
        if part.start > part.end:
            v.append(Violation("timestamp_order", f"Part {part.index} starts after it ends"))
        if not part.text:
            v.append(Violation("part_empty", f"Part {part.index} has no description"))
        v += _symbol_violations(part.text, f"Part {part.index}")
    for a, b in zip(parts, parts[1:]):
        if b.start < a.end:
            v.append(
                Violation("timestamp_order", f"Part {b.index} starts before Part {a.index} ends")
            )
    if segment_count is not None and parts and len(parts) != segment_count:
        v.append(Violation("part_count", f"expected {segment_count} parts, got {len(parts)}"))
    v += _leak_violations(caption, transcripts, language)
    return ValidationReport(tuple(v))


# ---- template backend -------------------------------------------------------------


def _profile_phrase(profile: SpeakerProfile, language: str) -> str:
    if language == "zh":
        age = {"young": "年轻", "middle-aged": "中年", "elderly": "老年"}.get(profile.age_bucket or "", "")
        gender = {"male": "男性", "female": "女性"}.get(profile.gender, "")
        return f"一位{age}{gender}说话者" if (age or gender) else "说话者"
    parts = [p for p in (profile.age_bucket, None if profile.gender == "unknown" else profile.gender) if p]
    if not parts:
        return "The speaker"
    article = "An" if parts[0][0] in "aeiou" else "A"
    return f"{article} {' '.join(parts)} speaker"


def _a(word: str) -> str:
    return f"{'an' if word[0] in 'aeiou' else 'a'} {word}"


def _style_en(s: SegmentAttributes) -> str:
    w = _LEVEL_WORDS["en"]
    return (
        f"{w['pitch'][s.pitch_cat]} pitch, {w['energy'][s.energy_cat]} energy "
        f"and a {w['speed'][s.speed_cat]} pace"
    )


def _style_zh(s: SegmentAttributes) -> str:
    w = _LEVEL_WORDS["zh"]
    return f"音高{w['pitch'][s.pitch_cat]}，能量{w['energy'][s.energy_cat]}，语速{w['speed'][s.speed_cat]}"


_EN_LINKS = ("Then", "Next", "Later", "Afterwards")
_ZH_LINKS = ("随后", "接着", "之后", "紧接着")


def template_vi(attrs: AttributeSequence, language: str = "en") -> str:
    """Deterministic instructional caption, one line per segment."""
    out = []
    for i, s in enumerate(attrs.segments):
        emo = _emotion_word(s.emotion, language)
        if language == "zh":
            if i == 0:
                out.append(f"{_profile_phrase(attrs.profile, 'zh')}以{emo}的情绪开口，{_style_zh(s)}。")
            else:
                link = _ZH_LINKS[(i - 1) % len(_ZH_LINKS)]
                out.append(f"{link}语气转为{emo}，{_style_zh(s)}。")
        else:
            if i == 0:
                out.append(f"{_profile_phrase(attrs.profile, 'en')} opens in {_a(emo)} mood, with {_style_en(s)}.")
            else:
                link = _EN_LINKS[(i - 1) % len(_EN_LINKS)]
                out.append(f"{link} the voice turns {emo}, with {_style_en(s)}.")
    return "\n".join(out)


def template_vd(attrs: AttributeSequence, language: str = "en") -> str:
    """Deterministic descriptive caption with global and per-part sections."""
    segs = attrs.segments
    words = [_emotion_word(s.emotion, language) for s in segs]
    if language == "zh":
        who = _profile_phrase(attrs.profile, "zh")
        if len(segs) == 1:
            glob = f"{who}全程保持{words[0]}的状态，{_style_zh(segs[0])}。"
        else:
            glob = f"{who}的情绪依次经历{'、'.join(words)}，语调与节奏随之变化，由{words[0]}逐步过渡到{words[-1]}。"
        parts = [
            f"Part {i} ({format_timestamp(s.start_s)} ~ {format_timestamp(s.end_s)}): "
            f"这一部分{_style_zh(s)}，整体呈现{w}的情绪。"
            for i, (s, w) in enumerate(zip(segs, words), 1)
        ]
    else:
        who = _profile_phrase(attrs.profile, "en")
        if len(segs) == 1:
            glob = f"{who} keeps {_a(words[0])} tone throughout, with {_style_en(segs[0])}."
        else:
            glob = (
                f"{who} moves through {', then '.join(words)} moods, and the tone, pace and pitch "
                f"shift with each change, from {_a(words[0])} opening to {_a(words[-1])} close."
            )
        parts = [
            f"Part {i} ({format_timestamp(s.start_s)} ~ {format_timestamp(s.end_s)}): "
            f"This part has {_style_en(s)}, and the emotion is {w}."
            for i, (s, w) in enumerate(zip(segs, words), 1)
        ]
    return "\n".join([GLOBAL_HEADER, glob, PARTIAL_HEADER, *parts])


# ---- composition ------------------------------------------------------------------


@dataclass
class CompositionResult:
    text: str
    attempts: int
    reports: list[ValidationReport] = field(default_factory=list)


def _validate(version: str, text: str, spec: PromptSpec, attrs: AttributeSequence, transcripts) -> ValidationReport:
    if version == "V_I":
        return validate_vi(
            text, spec.segment_count, transcripts, spec.language, [s.emotion for s in attrs.segments]
        )
    return validate_vd(text, spec.segment_count, transcripts, spec.language)


def compose_with_regeneration(
    client: TextGenerator | None,
    spec: PromptSpec,
    attrs: AttributeSequence,
    max_attempts: int = MAX_ATTEMPTS,
    transcripts: Sequence[str] | None = None,
    seed: int = 0,
) -> CompositionResult:
    """First validated caption from ``client`` (template backend when None).

    Retries append the previous violations to the prompt.
    """
    if max_attempts < 1:
        raise ValidationError("max_attempts must be >= 1", field="max_attempts")
    if transcripts is None:
        transcripts = [s.transcript for s in attrs.segments]
    base = build_prompt(spec, attrs)
    reports: list[ValidationReport] = []
    prompt = base
    for attempt in range(1, max_attempts + 1):
        if client is None:
            text = template_vi(attrs, spec.language) if spec.version == "V_I" else template_vd(attrs, spec.language)
        else:
            try:
                lines = client.send(prompt, spec.language, substream_seed(seed, spec.version, attempt))
            except ClientError as exc:
                reports.append(ValidationReport((Violation("client_error", str(exc)),)))
                continue
            text = "\n".join(lines).strip()
        report = _validate(spec.version, text, spec, attrs, transcripts)
        reports.append(report)
        if report.passed:
            return CompositionResult(text, attempt, reports)
        log.info("%s caption attempt %d rejected: %s", spec.version, attempt, report.rule_ids)
        prompt = (
            base
            + "\nYour previous answer was rejected for these reasons; fix all of them:\n"
            + report.feedback()
            + "\n"
        )
    raise CompositionError(f"no valid {spec.version} caption after {max_attempts} attempts", reports)


# ---- plan recovery ------------------------------------------------------------------


def _caption_language(text: str) -> str:
    return "zh" if _CJK_RE.search(text) else "en"


def parse_caption_plan_with_confidence(caption: str) -> tuple[TransitionPlan, bool]:
    """Plan encoded by a caption plus whether the reading is exact.

    SSML and template captions (one recognised emotion word per line) are
    exact; anything else is a best-effort keyword reading.
    """
    text = caption.strip()
    if text.startswith("<"):
        from .ssml import parse_ssml

        return parse_ssml(text).plan, True
    language = _caption_language(text)
    sequence: list[EmotionLabel] = []
    confident = True
    lines = _lines(text)
    if GLOBAL_HEADER in text and PARTIAL_HEADER in text:
        _, parts, _ = split_vd(text)
        lines = [p.text for p in parts or []]
    for ln in lines:
        found = find_emotions(ln, language)
        if len(set(found)) != 1:
            confident = False
        sequence.extend(found)
    if not sequence:
        raise CaptionParseError("caption names no recognisable emotion")
    return TransitionPlan(collapse_runs(sequence)), confident


def parse_caption_plan(caption: str) -> TransitionPlan:
    return parse_caption_plan_with_confidence(caption)[0]
