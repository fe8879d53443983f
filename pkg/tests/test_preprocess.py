import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SR, silence_insertion_case, tone
from emotranscap.audio import Waveform
from emotranscap.clients import CharTiming, Transcript
from emotranscap.errors import FormatError, RangeError, TranscriptionError
from emotranscap.preprocess import (
    AlignmentMap,
    FrameDecisionSequence,
    aggregate_segments,
    energy_vad,
    map_to_original,
    map_to_trimmed,
    remove_silence,
    transcribe,
    vad_classify,
    webrtc_available,
)


def hysteresis_oracle(decisions, window, ratio):
    """Frame-by-frame restatement of the windowed open/close rule."""
    need = max(1, int(np.ceil(ratio * window - 1e-9)))
    spans, buf, on, start, last = [], [], False, 0, 0
    for i, d in enumerate(decisions):
        buf = (buf + [(i, d)])[-window:]
        if d:
            last = i
        speech = sum(v for _, v in buf)
        if not on and speech >= need:
            on, start, buf = True, min(j for j, v in buf if v), []
        elif on and len(buf) - speech >= need:
            spans.append((start, last + 1))
            on, buf = False, []
    if on:
        spans.append((start, last + 1))
    return spans


def test_silence_is_nonspeech():
    dec = vad_classify(Waveform.silence(1.0, SR), 30)
    assert len(dec) == 33 and not any(dec.decisions)


def test_noise_burst_is_mostly_speech():
    rng = np.random.default_rng(0)
    dec = energy_vad(Waveform(np.clip(rng.normal(0, 0.5, SR), -1, 1), SR), 30)
    assert sum(dec.decisions) > len(dec) / 2


def test_empty_waveform():
    assert len(vad_classify(Waveform(np.zeros(0), SR))) == 0


@pytest.mark.parametrize("frame_ms,sr", [(25, 16000), (30, 22050)])
def test_unsupported_format(frame_ms, sr):
    with pytest.raises(FormatError):
        vad_classify(Waveform(np.zeros(sr), sr), frame_ms)


@pytest.mark.skipif(not webrtc_available(), reason="webrtcvad not installed")
def test_webrtc_backend_on_silence():
    dec = vad_classify(Waveform.silence(0.5, SR), 30, backend="webrtc")
    assert not any(dec.decisions)


def test_aggregate_all_and_none():
    assert aggregate_segments(FrameDecisionSequence(30, [True] * 20)) == [(0.0, 0.6)]
    assert aggregate_segments(FrameDecisionSequence(30, [False] * 20)) == []


def test_aggregate_two_bursts():
    pattern = [True] * 10 + [False] * 20 + [True] * 10
    spans = aggregate_segments(FrameDecisionSequence(30, pattern), 5, 0.8)
    assert len(spans) == 2
    assert spans[1][0] - spans[0][1] == pytest.approx(0.6)
    assert [(round(a / 0.03), round(b / 0.03)) for a, b in spans] == hysteresis_oracle(pattern, 5, 0.8)


@settings(max_examples=200)
@given(st.lists(st.booleans(), max_size=120), st.integers(1, 12), st.floats(0.05, 1.0))
def test_aggregate_matches_oracle(pattern, window, ratio):
    spans = aggregate_segments(FrameDecisionSequence(30, pattern), window, ratio)
    assert [(round(a / 0.03), round(b / 0.03)) for a, b in spans] == hysteresis_oracle(pattern, window, ratio)
    for (a0, b0), (a1, b1) in zip(spans, spans[1:]):
        assert b0 <= a1
    assert all(0 <= a < b <= len(pattern) * 0.03 + 1e-9 for a, b in spans)


def test_remove_silence_examples():
    w = tone(dur=3.0)
    same, amap = remove_silence(w, [(0.0, 3.0)])
    assert same == w and amap.kept_spans == ((0.0, 3.0),)
    out, amap = remove_silence(w, [(0.0, 1.0), (2.0, 3.0)])
    assert out.duration_s == pytest.approx(2.0)
    assert map_to_original(amap, 1.5) == pytest.approx(2.5)
    assert map_to_original(amap, 0.0) == 0.0
    assert out.samples[int(1.5 * SR)] == w.samples[int(2.5 * SR)]
    empty, amap = remove_silence(w, [])
    assert len(empty) == 0 and amap.kept_spans == ()


def test_junction_belongs_to_earlier_span():
    amap = AlignmentMap(((0.0, 1.0), (2.0, 3.0)))
    assert map_to_original(amap, 1.0) == 1.0
    assert map_to_trimmed(amap, 1.5) == 1.0


def test_map_range_error():
    with pytest.raises(RangeError):
        map_to_original(AlignmentMap(((0.0, 1.0),)), 1.5)


@st.composite
def alignment_maps(draw):
    edges = sorted(draw(st.lists(st.floats(0, 100), min_size=2, max_size=12, unique=True)))
    if len(edges) % 2:
        edges = edges[:-1]
    return AlignmentMap(tuple(zip(edges[::2], edges[1::2])))


@given(alignment_maps(), st.floats(0, 1), st.floats(0, 1))
def test_map_to_original_monotone(amap, u, v):
    total = amap.total_kept
    t1, t2 = sorted((u * total, v * total))
    assert map_to_original(amap, t1) <= map_to_original(amap, t2)


@given(alignment_maps(), st.floats(0, 1))
def test_map_inverse(amap, u):
    t = u * amap.total_kept
    assert map_to_trimmed(amap, map_to_original(amap, t)) == pytest.approx(t, abs=1e-9)


@pytest.mark.parametrize("seed", range(12))
def test_vad_trim_roundtrip(seed):
    wav, track, bounds = silence_insertion_case(np.random.default_rng(seed))
    spans = aggregate_segments(vad_classify(wav, 30, 2), 10, 0.9)
    trimmed, amap = remove_silence(wav, spans)
    kept = np.concatenate([track[round(a * SR):round(b * SR)] for a, b in amap.kept_spans])
    assert len(kept) == len(trimmed)
    for i, b in enumerate(bounds):
        t_trim = (np.flatnonzero(kept == i)[-1] + 1) / SR
        assert abs(map_to_original(amap, t_trim) - b) <= 0.030


def test_transcribe_paths():
    assert transcribe(None, tone(), "stored text").text == "stored text"

    class Stub:
        def transcribe(self, wav):
            return Transcript("fixed", (CharTiming("f", 0.0, 0.1), CharTiming("i", 0.1, 0.2)))

    assert transcribe(Stub(), tone()).text == "fixed"

    class Silent:
        def transcribe(self, wav):
            return Transcript("")

    assert transcribe(Silent(), Waveform.silence(1.0)).text == ""

    class Bad:
        def transcribe(self, wav):
            return Transcript("ab", (CharTiming("a", 0.5, 0.6), CharTiming("b", 0.1, 0.2)))

    with pytest.raises(TranscriptionError):
        transcribe(Bad(), tone())
