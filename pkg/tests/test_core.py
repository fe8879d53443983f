import dataclasses
import itertools
import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_attrs, make_manifest
from emotranscap.core import (
    EMOTIONS,
    CaptionRecord,
    EmotionLabel,
    TimedSegment,
    TransitionPlan,
    format_timestamp,
    parse_timestamp,
)
from emotranscap.errors import RangeError, ValidationError
from emotranscap.manifest import dumps, from_json, loads, read_manifests, to_json, write_manifests


def test_five_emotions_with_lowercase_forms():
    assert len(EmotionLabel) == 5
    assert {e.value for e in EMOTIONS} == {"angry", "happy", "sad", "neutral", "surprised"}
    assert EmotionLabel.parse("Angry") is EmotionLabel.ANGRY
    assert EmotionLabel.SAD.display == "Sadness"


@pytest.mark.parametrize("t,expected", [(0.0, "00:00"), (5.0, "00:05"), (65.9, "01:05"), (3599.99, "59:59")])
def test_format_timestamp(t, expected):
    assert format_timestamp(t) == expected


@pytest.mark.parametrize("t", [-0.1, 3600.0, float("nan")])
def test_format_timestamp_range(t):
    with pytest.raises(RangeError):
        format_timestamp(t)


@given(st.floats(0, 3599.999))
def test_timestamp_floor_roundtrip(t):
    assert parse_timestamp(format_timestamp(t)) == math.floor(t + 1e-9)


def test_plan_validation_exhaustive_up_to_length_4():
    for n in range(1, 5):
        for seq in itertools.product(EMOTIONS, repeat=n):
            ok = all(a != b for a, b in zip(seq, seq[1:]))
            if ok:
                assert TransitionPlan(seq).transition_count == n - 1
            else:
                with pytest.raises(ValidationError):
                    TransitionPlan(seq)


def test_empty_plan_rejected():
    with pytest.raises(ValidationError):
        TransitionPlan(())


def test_segment_invariants():
    with pytest.raises(ValidationError):
        TimedSegment(2.0, 2.0, "sad")
    with pytest.raises(ValidationError):
        TimedSegment(-1.0, 2.0, "sad")


def test_manifest_roundtrip_identity(tmp_path):
    m = make_manifest(("angry", "sad"))
    path = tmp_path / "m.jsonl"
    write_manifests(path, [m])
    assert path.read_text().count("\n") == 1
    assert read_manifests(path) == [m]


def test_manifest_empty_file(tmp_path):
    path = tmp_path / "m.jsonl"
    write_manifests(path, [])
    assert read_manifests(path) == []


def test_manifest_plan_mismatch_names_field():
    obj = to_json(make_manifest(("angry", "sad")))
    obj["plan"] = ["angry", "happy"]
    with pytest.raises(ValidationError) as err:
        from_json(obj)
    assert err.value.field == "plan"


def test_manifest_sentences_must_tile():
    obj = to_json(make_manifest(("angry", "sad")))
    obj["sentences"][1]["start_s"] = 2.5
    with pytest.raises(ValidationError):
        from_json(obj)


def test_unknown_fields_preserved():
    obj = to_json(make_manifest(("happy",)))
    obj["producer"] = {"version": 3}
    obj["sentences"][0]["note"] = "x"
    back = to_json(from_json(json.loads(json.dumps(obj))))
    assert back["producer"] == {"version": 3}
    assert back["sentences"][0]["note"] == "x"


def test_manifest_field_names():
    obj = to_json(make_manifest(("happy",)))
    for name in ("id", "language", "speaker_id", "plan", "sentences", "discourse_audio_ref", "captions", "attributes", "seed"):
        assert name in obj


def test_captions_and_attributes_roundtrip():
    attrs = make_attrs(["angry", "sad"])
    m = make_manifest(("angry", "sad"), durations=[3.0, 3.0])
    m2 = dataclasses.replace(m, captions=CaptionRecord("a\nb", "[Global Description]", attrs.plan, "<speak/>"), attributes=attrs)
    assert loads(dumps([m2])) == [m2]


_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=30
).filter(lambda s: s.strip())


@settings(max_examples=60)
@given(st.lists(st.tuples(st.sampled_from(EMOTIONS), _text, st.floats(0.1, 20)), min_size=1, max_size=5),
       st.sampled_from(["en", "zh"]))
def test_serialization_lossless_for_any_text(rows, language):
    # repeated emotions collapse in the plan, sentences keep theirs
    emotions = [r[0] for r in rows]
    m = make_manifest(tuple(emotions), [r[2] for r in rows], language, texts=[r[1] for r in rows])
    assert loads(dumps([m])) == [m]


@pytest.mark.parametrize("sep", ["\x85", "\u2028", "\u2029", "\x1c", "\r"])
def test_unicode_line_separators_survive_jsonl(tmp_path, sep):
    m = make_manifest(("angry", "sad"), [1.0, 2.0], "en", texts=[f"a{sep}b", "c"])
    path = tmp_path / "m.jsonl"
    write_manifests(path, [m, m])
    assert read_manifests(path) == [m, m]
