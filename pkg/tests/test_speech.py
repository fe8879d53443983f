import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SR, tone
from emotranscap.audio import Waveform, read_wav, write_wav
from emotranscap.core import EmotionLabel, TimedSegment
from emotranscap.errors import CatalogError, ConsistencyError, FormatError, NormalizationError
from emotranscap.fallback import PitchSER, ToneTTS, fallback_reference_key
from emotranscap.mtetr import format_segments
from emotranscap.speech import (
    ReferenceCatalog,
    concatenate,
    normalize_loudness,
    select_reference,
    synthesize_with_retry,
)


class FixedTTS:
    def __init__(self):
        self.seeds = []

    def synthesize(self, text, reference_key, seed):
        self.seeds.append(seed)
        return tone(200, 0.2)


class ScriptedSER:
    """Agrees with the target from call number ``agree_on`` onwards."""

    def __init__(self, target, agree_on):
        self.target, self.agree_on, self.calls = target, agree_on, 0

    def classify(self, wav):
        self.calls += 1
        if self.agree_on and self.calls >= self.agree_on:
            return self.target, 0.9
        wrong = next(e for e in EmotionLabel if e != self.target)
        return wrong, 0.6


def test_retry_first_attempt():
    res = synthesize_with_retry(FixedTTS(), ScriptedSER(EmotionLabel.HAPPY, 1), "hi", "happy", "r")
    assert res.attempts == 1
    assert res.provenance["attempts"] == 1


def test_retry_third_attempt_with_fresh_seeds():
    tts = FixedTTS()
    res = synthesize_with_retry(tts, ScriptedSER(EmotionLabel.HAPPY, 3), "hi", "happy", "r", 5, seed=9)
    assert res.attempts == 3 and res.ser_label == EmotionLabel.HAPPY
    assert len(set(tts.seeds)) == 3 and tts.seeds[0] == 9


def test_retry_exhaustion():
    tts = FixedTTS()
    with pytest.raises(ConsistencyError) as err:
        synthesize_with_retry(tts, ScriptedSER(EmotionLabel.SAD, 0), "hi", "sad", "r", 5)
    assert err.value.attempts == 5 and len(tts.seeds) == 5


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 6), st.sampled_from(list(EmotionLabel)))
def test_retry_never_returns_disagreeing_label(agree_on, emotion):
    ser = ScriptedSER(emotion, agree_on)
    try:
        res = synthesize_with_retry(FixedTTS(), ser, "x", emotion, "r", 5)
    except ConsistencyError:
        assert agree_on == 0 or agree_on > 5
        return
    assert res.ser_label == emotion


def test_normalize_two_segments():
    a = tone(200, 0.5).scaled(0.1 / tone(200, 0.5).rms)
    b = tone(300, 0.5).scaled(0.3 / tone(300, 0.5).rms)
    out = normalize_loudness([a, b])
    for w in out:
        assert w.rms == pytest.approx(0.2, rel=1e-6)


def test_normalize_identity_cases():
    w = tone(200, 0.3)
    assert normalize_loudness([w])[0].rms == pytest.approx(w.rms, rel=1e-12)
    same = [w.scaled(0.2 / w.rms)] * 3
    assert all(o.rms == pytest.approx(0.2, rel=1e-12) for o in normalize_loudness(same))


def test_normalize_silence_passthrough_and_error():
    silent = Waveform.silence(0.5, SR)
    out = normalize_loudness([silent, tone(200, 0.5)])
    assert out[0] == silent
    with pytest.raises(NormalizationError):
        normalize_loudness([silent, silent])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(1e-3, 1.0), min_size=1, max_size=5))
def test_normalize_idempotent(gains):
    segs = [tone(150 + 20 * i, 0.1).scaled(g) for i, g in enumerate(gains)]
    once = normalize_loudness(segs)
    twice = normalize_loudness(once)
    for a, b in zip(once, twice):
        np.testing.assert_allclose(a.samples, b.samples, rtol=1e-9, atol=1e-12)


def test_concatenate_paper_example():
    wav, segs = concatenate([Waveform.silence(5.0, SR), Waveform.silence(3.0, SR)], ["angry", "sad"])
    assert [(s.start_s, s.end_s, s.emotion.value) for s in segs] == [(0.0, 5.0, "angry"), (5.0, 8.0, "sad")]
    assert len(wav) == 8 * SR
    assert format_segments(segs).split("; ")[0] == 'start_time: 00:00, end_time: 00:05, emotion: "Angry"'


def test_concatenate_single_and_three():
    _, one = concatenate([tone(dur=1.5)], ["happy"])
    assert one == [TimedSegment(0.0, 1.5, "happy")]
    _, three = concatenate([tone(dur=1.0)] * 3, ["happy", "sad", "happy"])
    assert [s.end_s for s in three] == [1.0, 2.0, 3.0]


def test_concatenate_mixed_rates():
    with pytest.raises(FormatError):
        concatenate([Waveform(np.zeros(10), 16000), Waveform(np.zeros(10), 8000)], ["sad", "angry"])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 4000), min_size=1, max_size=6))
def test_concatenate_preserves_samples(lengths):
    segs = [Waveform(np.full(n, 0.01), SR) for n in lengths]
    emos = [list(EmotionLabel)[i % 2] for i in range(len(lengths))]
    wav, timeline = concatenate(segs, emos)
    assert len(wav) == sum(lengths)
    ends = [s.end_s for s in timeline]
    assert all(a < b for a, b in zip(ends, ends[1:]))
    assert ends[-1] == wav.duration_s


def test_ramp_option_changes_only_edges():
    w = tone(dur=0.5)
    plain, _ = concatenate([w, w], ["sad", "happy"])
    ramped, _ = concatenate([w, w], ["sad", "happy"], ramp_ms=10)
    n = int(0.01 * SR)
    np.testing.assert_array_equal(plain.samples[n:len(w) - n], ramped.samples[n:len(w) - n])
    assert ramped.samples[0] == 0.0


def test_catalog_lookup():
    cat = ReferenceCatalog.from_mapping({"spk01": {"happy": "refs/h.wav"}})
    assert select_reference(cat, "spk01", "happy") == "refs/h.wav"
    assert select_reference(cat, "spk01", "happy") == select_reference(cat, "spk01", EmotionLabel.HAPPY)
    with pytest.raises(CatalogError):
        select_reference(cat, "spk01", "surprised")
    with pytest.raises(CatalogError):
        cat.validate()


def test_fallback_catalog_complete():
    cat = ReferenceCatalog.fallback(["a", "b"])
    cat.validate(["a", "b"])
    assert select_reference(cat, "a", "sad") == fallback_reference_key("a", "sad")


def test_fallback_tts_ser_pair_mostly_agree():
    tts, ser = ToneTTS(misrender_rate=0.0), PitchSER()
    for e in EmotionLabel:
        wav = tts.synthesize("some words here", fallback_reference_key("spk01", e), seed=1)
        assert ser.classify(wav)[0] == e


def test_wav_roundtrip(tmp_path):
    w = tone(dur=0.25)
    write_wav(tmp_path / "x.wav", w)
    back = read_wav(tmp_path / "x.wav")
    assert back.sample_rate == SR and len(back) == len(w)
    np.testing.assert_allclose(back.samples, w.samples, atol=1 / 32767)
