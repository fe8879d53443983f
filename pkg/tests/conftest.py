import math

import numpy as np
import pytest

from emotranscap.attributes import AttributeThresholds, SegmentAnalysis, build_attribute_sequence
from emotranscap.audio import Waveform
from emotranscap.captions import GLOBAL_HEADER, PARTIAL_HEADER
from emotranscap.clients import CharTiming, Transcript
from emotranscap.core import EmotionLabel, SentenceRecord, SpeakerProfile, TimedSegment, TransitionPlan, UtteranceManifest

SR = 16000


def tone(freq=220.0, dur=1.0, amp=0.3, sr=SR, harmonics=3):
    t = np.arange(int(round(dur * sr))) / sr
    x = sum(amp / h * np.sin(2 * np.pi * freq * h * t) for h in range(1, harmonics + 1))
    return Waveform(x, sr)


def make_manifest(emotions=("angry", "sad"), durations=None, language="en", uid="u1", texts=None):
    durations = durations or [2.0] * len(emotions)
    texts = texts or [f"sentence number {i} is here" for i in range(len(emotions))]
    sents, t = [], 0.0
    for e, d, text in zip(emotions, durations, texts):
        sents.append(SentenceRecord(text, e, t, t + d, f"audio/{uid}/s.wav"))
        t += d
    plan = TransitionPlan.of(*[e for i, e in enumerate(emotions) if i == 0 or emotions[i - 1] != e])
    return UtteranceManifest(uid, language, "spk01", plan, tuple(sents), f"audio/{uid}/d.wav", 1)


def make_attrs(emotions, profile=SpeakerProfile("female", "young"), language="en", seg_s=3.0, transcripts=None):
    segs = [TimedSegment(i * seg_s, (i + 1) * seg_s, e) for i, e in enumerate(emotions)]
    transcripts = transcripts or [f"placeholder words {i}" for i in range(len(segs))]
    analyses = [
        SegmentAnalysis(s.start_s, s.end_s, s.emotion, tr, 150.0 + 40 * i, -20.0 - i, 3.0, language)
        for i, (s, tr) in enumerate(zip(segs, transcripts))
    ]
    return build_attribute_sequence(None, segs, analyses, profile, AttributeThresholds())


@pytest.fixture
def angry_sad_attrs():
    return make_attrs([EmotionLabel.ANGRY, EmotionLabel.SAD])


def silence_insertion_case(rng, sr=SR):
    """Speech of 1-4 tone segments with 0-4 digital-silence gaps inserted.

    Returns (signal, per-sample label track with -1 for inserted silence,
    boundary positions in seconds on the signal's own timeline).  A gap that
    lands on a segment boundary sits after the boundary.
    """
    n_seg = int(rng.integers(1, 5))
    lengths = [int(rng.uniform(0.5, 3.0) * sr) for _ in range(n_seg)]
    speech = np.concatenate(
        [tone(140 + 60 * i, n / sr, amp=0.3, sr=sr).samples for i, n in enumerate(lengths)]
    )
    labels = np.concatenate([np.full(n, i) for i, n in enumerate(lengths)])
    total = speech.size
    # gap positions at least 0.4 s apart so every speech stretch can open a VAD segment
    cuts: list[int] = []
    for _ in range(int(rng.integers(0, 5))):
        p = int(rng.integers(0, total + 1))
        if all(abs(p - c) >= int(0.4 * sr) for c in cuts):
            cuts.append(p)
    cuts.sort()
    pieces, lab, prev = [], [], 0
    for c in cuts:
        pieces += [speech[prev:c], np.zeros(int(rng.uniform(0.2, 1.5) * sr))]
        lab += [labels[prev:c], np.full(pieces[-1].size, -1)]
        prev = c
    pieces.append(speech[prev:])
    lab.append(labels[prev:])
    x, track = np.concatenate(pieces), np.concatenate(lab)
    # boundary = one past the last sample of the earlier segment
    bounds = [int(np.flatnonzero(track == i)[-1]) + 1 for i in range(n_seg - 1)]
    return Waveform(x, sr), track, [b / sr for b in bounds]


# ---- EES stubs -----------------------------------------------------------------


class EvenASR:
    """Spreads the reference characters evenly over the clip."""

    def __init__(self, texts):
        self.chars = [c for t in texts for c in t if c.isalnum()]

    def transcribe(self, wav):
        step = wav.duration_s / len(self.chars)
        return Transcript("".join(self.chars), tuple(
            CharTiming(c, i * step, (i + 1) * step) for i, c in enumerate(self.chars)
        ))


class LevelEmbedder:
    """Maps a constant-valued piece to a stored vector keyed by its level."""

    def __init__(self, table):
        self.table = table

    def embed(self, wav):
        return self.table[int(round(float(np.median(wav.samples)) * 10))]


def staircase(n, seg_s=1.0, sr=1000):
    return Waveform(np.concatenate([np.full(int(seg_s * sr), (i + 1) / 10) for i in range(n)]), sr)


def loop_ees(vectors, truths):
    total = 1.0
    for a, b in zip(vectors, truths):
        dot = na = nb = 0.0
        for x, y in zip(a, b):
            dot += x * y
            na += x * x
            nb += y * y
        total *= dot / math.sqrt(na * nb)
    return total


# ---- curated captions for a two-segment angry -> sad utterance --------------------

TRANSCRIPTS = ["the quarterly report arrived late again", "nobody noticed the missing pages"]

GOOD_VI = (
    "A young female speaker opens in an angry mood, with high pitch, strong energy and a quick pace.\n"
    "Then the voice turns sad, with low pitch, soft energy and a slow pace."
)
GOOD_VD = "\n".join([
    GLOBAL_HEADER,
    "The speaker moves from anger to sadness as the pace slows down.",
    PARTIAL_HEADER,
    "Part 1 (00:00 ~ 00:03): The emotion is angry, loud and quick.",
    "Part 2 (00:03 ~ 00:06): The emotion is sad, soft and slow.",
])

MALFORMED = {
    "vi_too_few_lines": ("V_I", GOOD_VI.splitlines()[0], "line_count"),
    "vi_too_many_lines": ("V_I", GOOD_VI + "\nAfterwards it turns sad again.", "line_count"),
    "vi_transcript_leak": (
        "V_I",
        GOOD_VI.replace("with low pitch", "saying nobody noticed the missing pages"),
        "transcript_leak",
    ),
    "vi_numbered": ("V_I", "1. " + GOOD_VI, "numbering"),
    "vi_markdown": ("V_I", GOOD_VI.replace("angry", "**angry**"), "forbidden_symbol"),
    "vi_profile_late": ("V_I", GOOD_VI.replace("the voice", "the woman"), "profile_position"),
    "vd_no_global": ("V_D", GOOD_VD.replace(GLOBAL_HEADER + "\n", ""), "missing_header"),
    "vd_no_partial": ("V_D", GOOD_VD.replace(PARTIAL_HEADER + "\n", ""), "missing_header"),
    "vd_overlap": ("V_D", GOOD_VD.replace("Part 2 (00:03", "Part 2 (00:02"), "timestamp_order"),
    "vd_reversed": ("V_D", GOOD_VD.replace("(00:00 ~ 00:03)", "(00:04 ~ 00:03)"), "timestamp_order"),
}


# ---- acceptance reporting ---------------------------------------------------------

_ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance verdict; printed live and again in the session summary."""
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def record(number, title, ok, detail=""):
        line = f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        _ACCEPTANCE.append(line)
        with capman.global_and_fixture_disabled():
            print("\n" + line, flush=True)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
