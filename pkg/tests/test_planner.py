import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from emotranscap.core import EMOTIONS, EmotionLabel, TransitionPlan
from emotranscap.errors import GenerationError, RangeError
from emotranscap.planner import (
    PERSPECTIVES,
    GenerationRequest,
    TopicHierarchy,
    build_generation_prompt,
    enumerate_transition_plans,
    generate_discourse,
)


def brute_force(alphabet, k):
    letters = sorted(alphabet, key=lambda e: e.value)
    return [
        TransitionPlan(seq)
        for seq in itertools.product(letters, repeat=k + 1)
        if all(a != b for a, b in zip(seq, seq[1:]))
    ]


@pytest.mark.parametrize("k,count", [(0, 5), (1, 20), (2, 80), (3, 320)])
def test_plan_counts_match_cartesian_filter(k, count):
    plans = enumerate_transition_plans(EMOTIONS, k)
    assert len(plans) == count == 5 * 4**k
    assert plans == brute_force(EMOTIONS, k)
    assert len(set(plans)) == count


def test_two_letter_alphabet():
    a, b = EmotionLabel.ANGRY, EmotionLabel.SAD
    assert enumerate_transition_plans([a, b], 1) == [TransitionPlan.of(a, b), TransitionPlan.of(b, a)]


def test_negative_k():
    with pytest.raises(RangeError):
        enumerate_transition_plans(EMOTIONS, -1)


@given(st.sets(st.sampled_from(EMOTIONS), min_size=2), st.integers(0, 4))
def test_count_formula(alphabet, k):
    n = len(alphabet)
    plans = enumerate_transition_plans(alphabet, k)
    assert len(plans) == n * (n - 1) ** k
    assert [p.to_json() for p in plans] == sorted(p.to_json() for p in plans)


def test_topics_ship_seven_primaries():
    topics = TopicHierarchy.load()
    assert len(topics.primary_topics) == 7
    assert all(topics.secondary[p] for p in topics.primary_topics)


def _req(plan=("sad", "happy"), language="en", seed=3, perspective="first"):
    return GenerationRequest(("Daily Life", "cooking dinner"), TransitionPlan.of(*plan), perspective, language, seed)


def test_prompt_names_emotions_in_order():
    prompt = build_generation_prompt(_req())
    assert prompt.index("sad") < prompt.index("happy")
    assert "Daily Life" in prompt
    assert build_generation_prompt(_req()) == prompt


def test_prompt_zh_asks_for_chinese():
    assert "Chinese" in build_generation_prompt(_req(language="zh"))


@pytest.mark.parametrize("language", ["en", "zh"])
@pytest.mark.parametrize("perspective", PERSPECTIVES)
def test_template_backend(language, perspective):
    req = _req(("angry", "neutral", "surprised"), language, perspective=perspective)
    out = generate_discourse(None, req)
    assert len(out) == 3 and all(s.strip() for s in out)
    assert generate_discourse(None, req) == out


class CountingStub:
    def __init__(self, answers):
        self.answers = list(answers)
        self.calls = []

    def send(self, prompt, language, seed):
        self.calls.append(seed)
        return self.answers[min(len(self.calls), len(self.answers)) - 1]


def test_wrong_count_retried_then_fails():
    stub = CountingStub([["one.", "two."]])
    with pytest.raises(GenerationError) as err:
        generate_discourse(stub, _req(("angry", "sad", "happy")), max_attempts=3)
    assert len(stub.calls) == 3
    assert len(set(stub.calls)) == 3
    assert len(err.value.attempts) == 3


def test_retry_succeeds():
    stub = CountingStub([["one."], ["one.", "two."]])
    assert generate_discourse(stub, _req()) == ["one.", "two."]
    assert len(stub.calls) == 2
