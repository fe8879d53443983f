"""Newline-delimited JSON persistence for utterance manifests."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator

from .core import (
    AttributeSequence,
    CaptionRecord,
    SegmentAttributes,
    SentenceRecord,
    SpeakerProfile,
    TransitionPlan,
    UtteranceManifest,
)
from .errors import ValidationError

MANIFEST_FIELDS = (
    "id",
    "language",
    "speaker_id",
    "plan",
    "sentences",
    "discourse_audio_ref",
    "captions",
    "attributes",
    "seed",
)
_SENTENCE_FIELDS = ("text", "emotion", "start_s", "end_s", "audio_ref")


def attributes_to_json(attrs: AttributeSequence) -> dict[str, Any]:
    return {
        "profile": {"gender": attrs.profile.gender, "age_bucket": attrs.profile.age_bucket},
        "segments": [
            {
                "start_s": s.start_s,
                "end_s": s.end_s,
                "emotion": s.emotion.value,
                "transcript": s.transcript,
                "pitch_hz": s.pitch_hz,
                "pitch_cat": s.pitch_cat,
                "energy_db": s.energy_db,
                "energy_cat": s.energy_cat,
                "speed_ups": s.speed_ups,
                "speed_cat": s.speed_cat,
            }
            for s in attrs.segments
        ],
    }


def attributes_from_json(obj: dict[str, Any]) -> AttributeSequence:
    prof = obj.get("profile") or {}
    return AttributeSequence(
        profile=SpeakerProfile(prof.get("gender", "unknown"), prof.get("age_bucket")),
        segments=tuple(SegmentAttributes(**s) for s in obj["segments"]),
    )


def to_json(m: UtteranceManifest) -> dict[str, Any]:
    sentences = []
    for s in m.sentences:
        entry = {
            "text": s.text,
            "emotion": s.emotion.value,
            "start_s": s.start_s,
            "end_s": s.end_s,
            "audio_ref": s.audio_ref,
        }
        entry.update(s.extra)
        sentences.append(entry)
    captions = None
    if m.captions is not None:
        captions = {
            "v_i": m.captions.v_i,
            "v_d": m.captions.v_d,
            "encoded_plan": m.captions.encoded_plan.to_json(),
        }
        if m.captions.ssml is not None:
            captions["ssml"] = m.captions.ssml
    obj: dict[str, Any] = {
        "id": m.id,
        "language": m.language,
        "speaker_id": m.speaker_id,
        "plan": m.plan.to_json(),
        "sentences": sentences,
        "discourse_audio_ref": m.discourse_audio_ref,
        "captions": captions,
        "attributes": attributes_to_json(m.attributes) if m.attributes is not None else None,
        "seed": m.seed,
    }
    for key, value in m.extra.items():
        obj.setdefault(key, value)
    return obj


def from_json(obj: dict[str, Any]) -> UtteranceManifest:
    missing = [k for k in MANIFEST_FIELDS if k not in obj]
    if missing:
        raise ValidationError("missing required field", field=missing[0])
    try:
        plan = TransitionPlan(tuple(obj["plan"]))
        sentences = tuple(
            SentenceRecord(
                text=s["text"],
                emotion=s["emotion"],
                start_s=float(s["start_s"]),
                end_s=float(s["end_s"]),
                audio_ref=s["audio_ref"],
                extra={k: v for k, v in s.items() if k not in _SENTENCE_FIELDS},
            )
            for s in obj["sentences"]
        )
        cap = obj.get("captions")
        captions = None
        if cap is not None:
            captions = CaptionRecord(
                v_i=cap["v_i"],
                v_d=cap["v_d"],
                encoded_plan=TransitionPlan(tuple(cap["encoded_plan"])),
                ssml=cap.get("ssml"),
            )
        attrs = obj.get("attributes")
        return UtteranceManifest(
            id=str(obj["id"]),
            language=obj["language"],
            speaker_id=str(obj["speaker_id"]),
            plan=plan,
            sentences=sentences,
            discourse_audio_ref=obj["discourse_audio_ref"],
            seed=int(obj["seed"]),
            captions=captions,
            attributes=attributes_from_json(attrs) if attrs is not None else None,
            extra={k: v for k, v in obj.items() if k not in MANIFEST_FIELDS},
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed manifest record: {exc}", field=str(exc)) from exc


def dumps(manifests: Iterable[UtteranceManifest]) -> str:
    return "".join(json.dumps(to_json(m), ensure_ascii=False) + "\n" for m in manifests)


def loads(text: str) -> list[UtteranceManifest]:
    out = []
    # split on \n only: str.splitlines also breaks on U+0085/U+2028, which json leaves unescaped
    for lineno, line in enumerate(text.split("\n"), 1):
        line = line.rstrip("\r")
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
        try:
            out.append(from_json(obj))
        except ValidationError as exc:
            err = ValidationError(f"line {lineno}: {exc}")
            err.field = exc.field
            raise err from exc
    return out


def write_manifests(path: str | Path, manifests: Iterable[UtteranceManifest]) -> None:
    Path(path).write_text(dumps(manifests), encoding="utf-8")


def append_manifest(path: str | Path, manifest: UtteranceManifest) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(to_json(manifest), ensure_ascii=False) + "\n")


def read_manifests(path: str | Path) -> list[UtteranceManifest]:
    return loads(Path(path).read_text(encoding="utf-8"))


def iter_manifests(path: str | Path) -> Iterator[UtteranceManifest]:
    yield from read_manifests(path)
