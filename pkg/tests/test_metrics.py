import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import EvenASR, LevelEmbedder, loop_ees, make_manifest, staircase
from emotranscap.clients import CharTiming
from emotranscap.core import CaptionRecord, TransitionPlan
from emotranscap.errors import AlignmentError, EvaluationError, ShapeError
from emotranscap.metrics import (
    NA,
    STAT_ROWS,
    EvalPair,
    acc_etc,
    acc_etc_by_k,
    acc_ett,
    boundaries_from_labels,
    dataset_stats,
    ees,
    ees_boundaries,
    ees_from_cosines,
    eer,
    eer_bruteforce,
    exact_sequence_accuracy,
    fea,
    is_na,
    jsonable,
    local_peaks,
)

P = TransitionPlan.of


def pair(pred, true):
    return EvalPair(P(*pred), P(*true))


def test_acc_etc_and_ett():
    pairs = [
        pair(("angry", "sad"), ("angry", "sad")),
        pair(("angry", "happy"), ("angry", "sad")),
        pair(("angry",), ("angry", "sad")),
        pair(("neutral",), ("neutral",)),
    ]
    assert acc_etc(pairs) == 75.0
    assert acc_ett(pairs) == pytest.approx(200 / 3)
    assert exact_sequence_accuracy(pairs) == 50.0
    assert acc_etc_by_k(pairs) == {0: 100.0, 1: pytest.approx(200 / 3)}


def test_acc_ett_na_and_empty():
    assert is_na(acc_ett([pair(("angry",), ("angry", "sad"))]))
    assert str(NA) == "N/A" and not NA and jsonable({"x": NA}) == {"x": None}
    with pytest.raises(EvaluationError):
        acc_etc([])


def test_fea():
    assert fea([0, 1, 2, 3], [0, 1, 2, 4]) == 75.0
    with pytest.raises(ShapeError):
        fea([0], [0, 1])
    with pytest.raises(EvaluationError):
        fea([], [])


# ---- EER ------------------------------------------------------------------------


def test_peaks_and_label_centers():
    assert local_peaks(np.array([0, 1, 0, 2, 2, 0])).tolist() == [1, 3, 4]
    det = np.zeros(50)
    det[8:13] = 1
    det[30:35] = 1
    assert boundaries_from_labels(det) == [10, 32]


def test_eer_perfect_and_flat():
    s = np.zeros(100)
    s[40] = 1.0
    assert eer(s, [42]) == 0.0
    assert eer(np.full(50, 0.3), [25]) == 50.0
    assert is_na(eer(s, []))


def test_eer_misplaced_peak():
    s = np.zeros(100)
    s[80] = 1.0
    # threshold 1 misses the boundary; threshold 0 fires on every flat frame
    assert eer(s, [20], 5) == eer_bruteforce(s, [20], 5)
    assert 40 < eer(s, [20], 5) < 60


@settings(max_examples=100, deadline=None)
@given(
    st.integers(1, 200).flatmap(
        lambda T: st.tuples(
            st.lists(st.integers(0, 6), min_size=T, max_size=T),
            st.lists(st.integers(0, T - 1), max_size=4),
            st.integers(0, 6),
        )
    )
)
def test_eer_fast_matches_bruteforce(case):
    # coarse integer scores force ties between peaks
    scores, bounds, tol = case
    s = np.array(scores, dtype=float) / 6
    fast, slow = eer(s, bounds, tol), eer_bruteforce(s, bounds, tol)
    assert (is_na(fast) and is_na(slow)) or fast == slow


# ---- EES ------------------------------------------------------------------------


def test_ees_identity_is_one():
    texts = ["abcd", "efgh", "ijkl"]
    vec = np.array([0.3, -1.2, 2.0])
    table = {i + 1: vec for i in range(3)}
    assert ees(staircase(3), texts, EvenASR(texts), LevelEmbedder(table), [vec] * 3) == 1.0


def test_ees_constructed_cosines():
    texts = ["abcd", "efgh"]
    table = {1: np.array([1.0, 0.0]), 2: np.array([1.0, 0.0])}
    truth = [np.array([0.9, math.sqrt(1 - 0.81)]), np.array([0.8, 0.6])]
    score = ees(staircase(2), texts, EvenASR(texts), LevelEmbedder(table), truth)
    assert score == pytest.approx(0.72, abs=1e-9)
    assert ees_from_cosines([0.9, 0.8]) == pytest.approx(0.72, abs=1e-12)


@pytest.mark.parametrize("seed", range(100))
def test_ees_matches_independent_loop(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    texts = ["".join(rng.choice(list("abcdefgh"), int(rng.integers(1, 9)))) for _ in range(n)]
    table = {i + 1: rng.normal(size=6) for i in range(n)}
    truth = [rng.normal(size=6) for _ in range(n)]
    # equal character counts keep every level inside its own span
    texts = [t.ljust(8, "x")[:8] for t in texts]
    got = ees(staircase(n), texts, EvenASR(texts), LevelEmbedder(table), truth)
    assert got == pytest.approx(loop_ees([table[i + 1] for i in range(n)], truth), rel=1e-12)


def test_ees_boundaries_and_errors():
    timings = [CharTiming(c, i * 0.1, i * 0.1 + 0.08) for i, c in enumerate("abcdef")]
    assert ees_boundaries(["abc", "def"], timings, 1.0) == [(0.0, pytest.approx(0.29)), (pytest.approx(0.29), 1.0)]
    with pytest.raises(AlignmentError):
        ees_boundaries(["abcdefg"], timings, 1.0)
    with pytest.raises(ShapeError):
        ees(staircase(1), ["ab"], EvenASR(["ab"]), LevelEmbedder({1: np.ones(2)}), [])


# ---- statistics ------------------------------------------------------------------


def test_stats_cells():
    ms = [
        make_manifest(("angry", "sad"), [2.0, 3.0], uid="a", texts=["one two", "three four five"]),
        make_manifest(("happy", "sad"), [1.0, 1.0], uid="b", texts=["one", "two"]),
        make_manifest(("angry",), [4.0], uid="c", texts=["just four words here"]),
        make_manifest(("sad", "angry"), [2.0, 2.0], language="zh", uid="d", texts=["你好", "再见了"]),
    ]
    ms[0] = dataclasses.replace(ms[0], captions=CaptionRecord("one two three", "a b c d e", ms[0].plan))
    table = dataset_stats(ms)
    assert table.columns == [(0, "en"), (1, "en"), (1, "zh")]
    assert [r[0] for r in table.rows()] == list(STAT_ROWS)
    en1 = (1, "en")
    assert table.value("Words", en1) == 7
    assert table.value("Max words per utterance", en1) == 5
    assert table.value("Mean utterance duration(s)", en1) == 3.5
    assert table.value("Emotion Transitions", en1) == 2
    assert table.value("Max caption (V_I) length", en1) == 3
    assert table.value("Words", (1, "zh")) == 5
    assert table.value("Min caption (V_D) length", (0, "en")) is None
    tsv = table.to_tsv().splitlines()
    assert tsv[0].split("\t") == ["Item", "w/o Trans", "One Trans", "One Trans"]
    assert len(tsv) == 1 + len(STAT_ROWS)
    assert "-" in table.to_text()
    with pytest.raises(EvaluationError):
        dataset_stats([])
