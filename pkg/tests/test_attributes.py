import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SR, make_manifest, tone
from emotranscap.attributes import (
    LEVELS,
    AttributeThresholds,
    SegmentAnalysis,
    analyze_segment,
    build_attribute_sequence,
    categorize,
    estimate_energy,
    estimate_pitch,
    estimate_speed,
    pitch_track,
)
from emotranscap.audio import Waveform
from emotranscap.core import SpeakerProfile, TimedSegment
from emotranscap.errors import AlignmentError, UnvoicedSignalError


@pytest.mark.parametrize("f0", [110.0, 220.0, 95.0, 310.0])
def test_pitch_of_harmonic_tone(f0):
    assert estimate_pitch(tone(f0, 1.0)) == pytest.approx(f0, abs=2.0)


def test_pitch_of_silence():
    with pytest.raises(UnvoicedSignalError):
        estimate_pitch(Waveform.silence(0.5))


def test_energy_closed_forms():
    t = np.arange(SR) / SR
    square = Waveform(np.sign(np.sin(2 * np.pi * 100 * t + 0.1)), SR)
    assert estimate_energy(square) == pytest.approx(0.0, abs=1e-9)
    sine = Waveform(0.5 * np.sin(2 * np.pi * 100 * t), SR)
    assert estimate_energy(sine) == pytest.approx(20 * math.log10(0.5 / math.sqrt(2)), abs=1e-3)
    assert estimate_energy(Waveform.silence(0.1)) == -120.0


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 3.0))
def test_gain_shifts_energy_and_keeps_pitch_lag(g):
    w = tone(180, 0.5, amp=0.2)
    assert estimate_energy(w.scaled(g)) - estimate_energy(w) == pytest.approx(20 * math.log10(g), abs=1e-6)
    lags, _ = pitch_track(w)
    lags_g, _ = pitch_track(w.scaled(g))
    # integer argmax lag identical; the sub-sample refinement only differs by float noise
    np.testing.assert_array_equal(np.round(lags), np.round(lags_g))
    np.testing.assert_allclose(lags, lags_g, rtol=1e-12)


def test_speed_examples():
    assert estimate_speed(" ".join(["word"] * 10), 5.0, "en").value == 2.0
    assert estimate_speed("我" * 20, 4.0, "zh").value == 5.0
    est = estimate_speed("", 3.0, "en")
    assert est.value == 0.0 and est.empty_transcript


@given(st.floats(-1e6, 1e6, allow_nan=False), st.floats(-100, 100), st.floats(0, 100))
def test_categories_half_open_and_exhaustive(value, lo, width):
    hi = lo + width
    cat = categorize(value, (lo, hi), LEVELS)
    expected = "low" if value < lo else ("medium" if value < hi else "high")
    assert cat == expected


def _analyses(segs, lang="en"):
    return [SegmentAnalysis(s.start_s, s.end_s, s.emotion, "a b c", 150.0, -20.0, 3.0, lang) for s in segs]


def test_sequence_order_and_length():
    segs = [TimedSegment(0, 2, "angry"), TimedSegment(2, 4, "sad")]
    seq = build_attribute_sequence(make_manifest(("angry", "sad")), segs, _analyses(segs), SpeakerProfile())
    assert [s.emotion.value for s in seq.segments] == ["angry", "sad"]


@given(st.permutations(range(4)))
def test_assembly_is_permutation_invariant(order):
    segs = [TimedSegment(i, i + 1, e) for i, e in enumerate(["angry", "sad", "happy", "neutral"])]
    an = _analyses(segs)
    base = build_attribute_sequence(None, segs, an, SpeakerProfile("male", "young"))
    shuffled = build_attribute_sequence(None, [segs[i] for i in order], [an[i] for i in order], SpeakerProfile("male", "young"))
    assert shuffled == base


def test_emotion_mismatch_raises():
    segs = [TimedSegment(0, 2, "angry"), TimedSegment(2, 4, "happy")]
    with pytest.raises(AlignmentError):
        build_attribute_sequence(make_manifest(("angry", "sad")), segs, _analyses(segs), SpeakerProfile())


def test_categories_follow_thresholds():
    segs = [TimedSegment(0, 2, "angry")]
    th = AttributeThresholds(pitch_hz=(100, 140), energy_db=(-30, -25))
    seq = build_attribute_sequence(None, segs, _analyses(segs), SpeakerProfile(), th)
    s = seq.segments[0]
    assert (s.pitch_cat, s.energy_cat, s.speed_cat) == ("high", "high", "medium")


def test_energy_tertiles():
    vals = list(range(-60, -30))
    random.Random(0).shuffle(vals)
    th = AttributeThresholds().with_energy_tertiles(vals)
    lo, hi = th.energy_db
    cats = [categorize(v, (lo, hi), LEVELS) for v in vals]
    assert {c: cats.count(c) for c in LEVELS} == {"low": 10, "medium": 10, "high": 10}


def test_analyze_segment_on_tone():
    w = tone(200, 2.0)
    a = analyze_segment(w, TimedSegment(0, 2.0, "happy"), "one two three four", "en")
    assert a.pitch_hz == pytest.approx(200, abs=2)
    assert a.speed_ups == 2.0
